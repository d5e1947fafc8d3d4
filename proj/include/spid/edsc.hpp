// Event-driven contracts: oracle events, committee voting, contract dispatch.
#pragma once

#include "spid/coding.hpp"
#include "spid/dag.hpp"
#include "spid/ledger.hpp"

#include <array>
#include <functional>
#include <optional>

namespace spid {

using NodeId = uint32_t;
using Bytes = std::vector<uint8_t>;

// Keyed BLAKE2b of (shared_seed, epoch) under the node secret, first 8 bytes.
uint64_t vrf_output(const Bytes& node_secret, const Bytes& shared_seed, uint64_t epoch);

// Shared seed for one epoch, derived from the scenario seed.
Bytes epoch_seed(uint64_t scenario_seed, ChainId chain, uint64_t epoch);

struct NodeStake {
    NodeId node = 0;
    uint64_t stake = 1;
    Bytes secret;
};

struct CommitteeSelection {
    uint64_t epoch = 0;
    std::vector<NodeId> members;               // rank order
    std::map<NodeId, uint64_t> vrf_outputs;
};

// max(1, round(n / 10))
std::size_t committee_size(std::size_t n);

CommitteeSelection select_committee(const std::vector<NodeStake>& nodes, const Bytes& shared_seed,
                                    uint64_t epoch, std::size_t size);

enum class EventKind { X1 = 1, X2, X3, X4, X5, X6, X7 };
enum class Contract { C1 = 1, C2, C3, C4, C5, C6 };
enum class Outcome { pending, active, discarded };

const char* to_string(EventKind k);
const char* to_string(Contract c);
const char* to_string(Outcome o);
Contract contract_for(EventKind k);

struct EventRecord {
    EventKind kind = EventKind::X1;
    ChainId chain = 0;
    NodeId proposer_node = 0;
    uint64_t epoch = 0;
    uint64_t payload = 0;                 // digest
    std::map<NodeId, bool> votes;         // true = approve
    Outcome outcome = Outcome::pending;
    uint32_t attempts = 0;                // proposals voted on

    std::size_t approvals() const;
};

// payload proposed by a given committee member
using PayloadFn = std::function<uint64_t(NodeId proposer)>;
// does `voter` approve `payload` proposed by `proposer`
using VerdictFn = std::function<bool(NodeId voter, NodeId proposer, uint64_t payload)>;

// Rank-order proposals, strict majority. Returns the first active record, or a
// discarded record when every member's proposal fails.
EventRecord propose_and_vote(EventKind kind, ChainId chain, uint64_t epoch, const CommitteeSelection& committee,
                             const PayloadFn& payload, const VerdictFn& verdict);

struct EventPools {
    std::vector<EventRecord> temp;
    std::map<uint64_t, std::vector<EventRecord>> side_ledger;

    // Only active records enter; a second active record of one kind in one
    // epoch is a sequencing error.
    void publish(const EventRecord& e);
};

std::vector<EventRecord> drain_pool(EventPools& pools, uint64_t epoch);

// One JSON object per line.
std::string event_log_line(const EventRecord& e);

// ---- contracts -----------------------------------------------------------

struct WorkerTask {
    uint32_t worker = 0;
    uint32_t group = 0;
    uint32_t position = 0;
    Matrix a, b, dc;
    std::size_t entries() const { return a.data.size() + b.data.size() + dc.data.size(); }
};

struct WorkerResult {
    uint32_t worker = 0;
    uint32_t group = 0;
    uint32_t position = 0;
    Matrix w_in, w_out;
};

// Plain row partition used when coding is disabled: worker k owns rows [first, first+count).
struct RowPartition { std::size_t first = 0, count = 0; };
std::vector<RowPartition> partition_rows(std::size_t M, uint32_t n);

// C1 / C3: task assignment for (A, B, dC). Coded: one task per worker outside
// S; uncoded: one plain partition per worker.
std::vector<WorkerTask> assign_tasks(const Matrix& A, const Matrix& B, const Matrix& dC, const GroupPlan& plan,
                                     bool coded);

// Results from the workers that answered. nullopt when not yet decodable.
struct DecodedState { Matrix w_in, w_out; };
std::optional<DecodedState> collect_results(const std::vector<WorkerResult>& results, const GroupPlan& plan,
                                            bool coded);

struct C2Output {
    Block proposed_block;              // Z^P
    std::vector<Amount> balances;
};
// Decode W_in/W_out, compute balances, zero failing rows of X^P.
std::optional<C2Output> contract_c2(const std::vector<WorkerResult>& results, const GroupPlan& plan, bool coded,
                                    const std::vector<Amount>& genesis, const Block& proposed);

// C4: per-tip decoded states -> verdicts (valid subset is Z^V).
std::optional<std::vector<bool>> contract_c4(const std::vector<std::vector<WorkerResult>>& per_tip,
                                             const GroupPlan& plan, bool coded,
                                             const std::vector<TipPayload>& tips,
                                             const std::map<ChainId, std::vector<Amount>>& genesis);

// C5 submission: attach with parents Z^V, genesis when empty.
void contract_c5_submit(DagLedger& dag, DagBlock block, const std::vector<BlockId>& valid_parents);
// C5 weight update.
std::vector<BlockId> contract_c5_update(DagLedger& dag, SimTime now, int64_t round);
// C6: super-block for the round, appended to the chain ledger.
std::map<ChainId, BlockId> contract_c6(const DagLedger& dag, int64_t round, Rng& rng,
                                       std::vector<std::map<ChainId, BlockId>>& chain_ledger);

using ContractHandler = std::function<void(const EventRecord&)>;
struct ContractTable {
    std::array<ContractHandler, 6> handlers;
    void bind(Contract c, ContractHandler h) { handlers[std::size_t(c) - 1] = std::move(h); }
};

// Checks activity and subscription, then runs the handler. Throws DispatchError.
void dispatch_contract(Contract c, const EventRecord& e, const ContractTable& table);

} // namespace spid
