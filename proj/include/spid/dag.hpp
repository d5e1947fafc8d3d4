// Shared DAG ledger: attachment, tips, aggregated weight, confirmation.
#pragma once

#include "spid/ledger.hpp"

#include <map>
#include <optional>
#include <set>
#include <unordered_map>

namespace spid {

// Weights as integer shares of a common denominator so sums are exact.
struct ChainWeights {
    std::vector<uint64_t> num;
    uint64_t den = 1;

    static ChainWeights equal(std::size_t N);
    static ChainWeights from_values(const std::vector<double>& w);
    std::size_t size() const { return num.size(); }
    double value(ChainId c) const { return double(num.at(c)) / double(den); }
};

enum class BlockStatus { tip, unconfirmed, confirmed };
const char* to_string(BlockStatus s);

using BlockId = uint64_t;
using SimTime = int64_t;   // nanoseconds

struct DagBlock {
    BlockId id = 0;
    ChainId proposer = 0;
    uint64_t epoch_issued = 0;
    Block payload;
    std::vector<uint64_t> tx_ids;
    std::vector<BlockId> parents;
    BlockStatus status = BlockStatus::tip;
    SimTime attach_time = 0;
    std::optional<SimTime> confirm_time;
    int64_t confirm_round = -1;
    uint64_t approver_chains = 0;   // bit per chain, own chain included
};

class DagLedger {
public:
    static constexpr BlockId kGenesis = 0;
    static constexpr ChainId kNoChain = UINT32_MAX;

    DagLedger(ChainWeights weights, double eta);

    // Throws AttachError on unknown parent, duplicate id or empty parent set;
    // the ledger is unchanged on error.
    void attach(DagBlock block);

    double aggregated_weight(BlockId id) const;
    uint64_t weight_units(uint64_t chain_bits) const;
    bool meets_eta(uint64_t units) const;

    // Flips every non-confirmed block with AW >= eta. Returns new ids, ascending.
    std::vector<BlockId> update_confirmations(SimTime now, int64_t round);

    bool contains(BlockId id) const { return blocks_.count(id) != 0; }
    const DagBlock& block(BlockId id) const;
    const std::vector<BlockId>& children(BlockId id) const;
    const std::set<BlockId>& tips() const { return tips_; }
    std::size_t size() const { return blocks_.size(); }
    const ChainWeights& weights() const { return weights_; }
    double eta() const { return eta_; }
    const std::vector<BlockId>& order() const { return order_; }
    const std::vector<BlockId>& confirmed_in_round(int64_t round) const;

    // One line per block: id proposer epoch parents status aw
    std::string snapshot() const;

private:
    ChainWeights weights_;
    double eta_;
    uint64_t eta_micro_;
    std::unordered_map<BlockId, DagBlock> blocks_;
    std::unordered_map<BlockId, std::vector<BlockId>> children_;
    std::set<BlockId> tips_;
    std::set<BlockId> dirty_;
    std::vector<BlockId> order_;
    std::map<int64_t, std::vector<BlockId>> by_round_;
};

std::vector<BlockId> select_tips_honest(const DagLedger& ledger, std::size_t K, Rng& rng);

// Own tips oldest first, then globally oldest; ties to the lowest id.
std::vector<BlockId> select_tips_orphanage(const DagLedger& ledger, std::size_t K, ChainId attacker, Rng& rng);

// chain -> one block confirmed in `round`, chosen uniformly. Chains without
// confirmations are absent. Blocks in `exclude` are never picked.
std::map<ChainId, BlockId> assemble_confirmed_superblock(const DagLedger& ledger, int64_t round, Rng& rng,
                                                         const std::set<BlockId>& exclude = {});

} // namespace spid
