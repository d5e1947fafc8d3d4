// Node and chain behaviour: workers, stragglers, adversarial issuance.
#pragma once

#include "spid/edsc.hpp"

#include <optional>

namespace spid {

enum class NodeRole { committee_eligible, worker };

struct NodeSpec {
    NodeId id = 0;
    ChainId chain = 0;
    NodeRole role = NodeRole::worker;
    uint64_t stake = 1;
    double straggler_p = 0;
    bool honest = true;

    bool straggler() const { return role == NodeRole::worker && straggler_p >= 1.0; }
};

enum class ParentStrategy { orphanage };

struct AdversaryPolicy {
    double spam_rate = 0;              // mu
    ParentStrategy parent_strategy = ParentStrategy::orphanage;
    double invalid_tx_fraction = 0.5;
};

// Straggler draw for one chain. Every group of `base` receives exactly its
// frozen count of stragglers, picked uniformly inside the group; if round(lambda*n)
// exceeds the frozen total (capped groups, lambda near 1) the rest are drawn
// uniformly from the remaining workers.
std::vector<double> draw_straggler_probabilities(uint32_t n, std::size_t M, double lambda, Rng& rng);

// n workers (ids 0..n-1) followed by n committee-eligible nodes (ids n..2n-1).
std::vector<NodeSpec> make_chain_nodes(ChainId chain, uint32_t n, const std::vector<double>& straggler_p, bool honest);

// Stored-shard update for a task, or silence for a straggler.
std::optional<WorkerResult> worker_respond(const NodeSpec& node, const WorkerTask& task, StoredShards& stored);

// Honest-looking transfers, then floor(fraction * active rows) rows pushed past
// their balance. Returns the tampered rows through `tampered` when given.
Block make_invalid_block(Rng& rng, std::size_t M, const AdversaryPolicy& policy, const std::vector<Amount>& balance_view,
                         ChainId source, std::size_t N, uint64_t epoch, std::size_t tx_count,
                         std::vector<uint32_t>* tampered = nullptr);

// Transfers that each sender can afford out of the given balances; every
// sender spends at most `spend_fraction` of its balance in total.
Block make_honest_block(Rng& rng, std::size_t M, const std::vector<Amount>& balance_view, ChainId source, std::size_t N,
                        uint64_t epoch, std::size_t tx_count, double spend_fraction);

// Per-chain issuance times in ns over [0, duration). The faction total is
// round(rate * minutes), split across `chains` by largest remainder, with
// even spacing and a seeded phase per chain.
std::vector<std::vector<int64_t>> schedule_issuance(double rate_per_min, std::size_t chains, double minutes, Rng& rng);

double mu_crit(std::size_t K);

} // namespace spid
