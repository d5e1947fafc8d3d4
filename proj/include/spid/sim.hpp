// Deterministic discrete-event simulation of the four-stage epoch and metrics.
#pragma once

#include "spid/nodes.hpp"

#include <deque>
#include <functional>
#include <queue>

namespace spid {

struct ScenarioConfig {
    std::string name = "scenario";
    uint32_t N = 10;
    uint32_t n = 20;
    std::size_t M = 100;
    std::size_t K = 2;
    double lambda = 0.1;
    double eta = 0.67;
    double mu = 0.0;
    double adversary_fraction = 0.0;
    double gamma = 20;               // DAG blocks per minute, network wide
    double duration_min = 2;
    double link_latency_ms = 100;
    double bandwidth_mbps = 20;
    double task_timeout_ms = 500;
    double vote_timeout_ms = 500;
    bool coding_enabled = true;
    uint64_t seed = 1;
    uint64_t genesis_balance = 1000;
    std::vector<uint64_t> genesis;   // per account, overrides genesis_balance when set
    double compute_ns_per_entry = 200;
    double invalid_tx_fraction = 0.5;
    std::size_t tx_per_block = 20;
    double spend_fraction = 0.05;
    std::vector<double> weights;     // per chain, normalised on use; empty = equal
    std::size_t ds_pairs = 0;
    std::size_t ds_regular = 0;
    double tip_sample_s = 1.0;
    uint32_t max_reassign_rounds = 50;

    std::size_t adversarial_chains() const;
    double mu_crit() const;
    friend bool operator==(const ScenarioConfig&, const ScenarioConfig&) = default;
};

// Field-level check; throws ConfigError naming the field.
void validate_config(const ScenarioConfig& c);

struct DoubleSpendStats {
    std::size_t pairs = 0;
    std::size_t regular = 0;
    std::size_t detected_pairs = 0;
    std::size_t false_alarms = 0;
    double p_d = 0;
    double p_fa = 0;
    std::optional<double> mean_delay_s;
};

struct MetricsReport {
    ScenarioConfig config;
    double intra_throughput = 0;     // Z^P per chain per minute
    double inter_throughput = 0;     // correctly confirmed honest blocks per minute
    std::vector<std::optional<double>> gini_series;   // per minute bin
    std::optional<double> gini_mean;
    std::vector<std::pair<double, std::size_t>> tip_pool_series;
    std::size_t final_tip_pool = 0;
    std::vector<std::pair<BlockId, double>> finality_samples;
    std::optional<double> mean_finality_s;
    std::vector<std::size_t> throughput_per_minute;
    DoubleSpendStats double_spend;
    std::size_t honest_blocks = 0;
    std::size_t adversarial_blocks = 0;
    std::size_t adversarial_confirmed = 0;
    std::size_t stage_timeouts = 0;
    std::size_t straggler_messages = 0;
    std::size_t superblocks = 0;
    bool conservation_ok = false;
    bool ledgers_consistent = false;
};

// Gini coefficient of the counts; nullopt when every count is zero.
std::optional<double> gini(const std::vector<double>& counts);

struct BlockLabel {
    BlockId tip = 0;
    ChainId chain = 0;
    uint64_t epoch = 0;
    std::optional<BlockId> labeller_block;
};

struct DoubleSpendTruth {
    std::map<BlockId, std::size_t> pair_of;           // injected id -> pair index
    std::vector<std::pair<SimTime, SimTime>> inject;  // per pair, both injection times
    std::vector<std::pair<BlockId, BlockId>> blocks;  // per pair, ids once attached
};

class Simulation {
public:
    explicit Simulation(ScenarioConfig cfg);

    // Schedules issuance, tip sampling and injections, then runs to the configured duration.
    void run();
    // Starts one epoch of `chain` at the current time and processes events until it ends.
    void run_epoch(ChainId chain);

    MetricsReport report() const;

    const ScenarioConfig& config() const { return cfg_; }
    const DagLedger& dag() const { return dag_; }
    SimTime now() const { return now_; }
    const EventPools& pools(ChainId c) const { return chains_.at(c).pools; }
    const std::vector<std::map<ChainId, BlockId>>& chain_ledger(ChainId c) const { return chains_.at(c).ledger; }
    const std::vector<std::string>& event_log() const { return log_; }
    const CumulativeState& state(ChainId c) const { return chains_.at(c).state; }
    std::size_t blocks_produced(ChainId c) const { return chains_.at(c).produced; }
    bool conservation_holds() const;
    const std::vector<BlockLabel>& labels() const { return labels_; }
    const DoubleSpendTruth& truth() const { return truth_; }

    // Injects 2*pairs blocks sharing one transaction id per pair at uniform
    // times in the window of the first `regular` honest issuances.
    void inject_double_spends(std::size_t pairs, std::size_t regular, Rng& rng);

    // Stage-2 detector: tips carrying a transaction id first attached earlier
    // are labelled and returned; the rest pass, in the given order.
    std::vector<BlockId> detect_double_spends(const std::vector<BlockId>& tips, ChainId chain, uint64_t epoch);

private:
    struct Chain {
        ChainId id = 0;
        bool honest = true;
        std::vector<NodeSpec> nodes;
        std::vector<NodeStake> stakes;
        GroupPlan plan;
        std::vector<StoredShards> stored;
        CumulativeState state;
        Matrix pending_a, pending_b, worker_c;
        std::deque<SimTime> arrivals;
        bool busy = false;
        uint64_t epoch = 0;
        EventPools pools;
        std::vector<std::map<ChainId, BlockId>> ledger;
        Rng rng;
        std::size_t produced = 0;
        std::size_t label_start = 0;
        // epoch scratch
        CommitteeSelection committee;
        Block xp, zp;
        bool has_block = false;
        std::vector<BlockId> valid;
    };

    struct Ev {
        SimTime time;
        uint64_t seq;
        std::function<void()> fn;
        bool operator>(const Ev& o) const { return time != o.time ? time > o.time : seq > o.seq; }
    };

    void at(SimTime t, std::function<void()> fn);
    bool step(SimTime limit);
    void arrival(ChainId j);
    void start_epoch(ChainId j);
    void stage1_compute(ChainId j);
    void stage2(ChainId j);
    void stage3(ChainId j);
    void attach_block(ChainId j);
    void stage4(ChainId j);
    void finish_epoch(ChainId j);
    std::optional<SimTime> vote(ChainId j, EventKind kind, uint64_t digest);

    // Times the task messages. `done` is when every group became decodable
    // (or every partition answered); task_index lists the answers used and
    // responder the worker that produced each.
    struct Collected {
        std::optional<SimTime> done;
        std::vector<std::size_t> task_index;
        std::vector<uint32_t> responder;
    };
    Collected gather(Chain& c, const std::vector<WorkerTask>& tasks, const std::vector<std::size_t>& entries,
                     SimTime start);

    SimTime transfer_ns(std::size_t entries) const;
    SimTime compute_ns(std::size_t entries) const;
    std::vector<Amount> genesis_vec() const;
    Matrix outflow_dense(const Block& b) const;

    ScenarioConfig cfg_;
    DagLedger dag_;
    std::vector<Chain> chains_;
    std::priority_queue<Ev, std::vector<Ev>, std::greater<Ev>> queue_;
    uint64_t seq_ = 0;
    SimTime now_ = 0;
    SimTime end_ = 0;
    BlockId next_id_ = 1;
    uint64_t next_tx_ = 1;
    std::vector<std::map<ChainId, BlockId>> superblocks_;
    std::vector<std::string> log_;
    std::map<uint64_t, std::size_t> first_tx_pos_;    // tx id -> attach position
    std::map<BlockId, std::size_t> attach_pos_;
    std::vector<BlockLabel> labels_;
    std::set<BlockId> labelled_;
    DoubleSpendTruth truth_;
    std::set<BlockId> adversarial_ids_;
    std::vector<std::pair<double, std::size_t>> tip_series_;
    std::size_t stage_timeouts_ = 0;
    std::size_t straggler_msgs_ = 0;
    Rng sb_rng_;
    uint64_t honest_mask_ = 0;
};

struct ScenarioArtifacts {
    std::vector<std::string> event_log;
    std::string dag_snapshot;
};

MetricsReport run_scenario(const ScenarioConfig& cfg, ScenarioArtifacts* artifacts = nullptr);

} // namespace spid
