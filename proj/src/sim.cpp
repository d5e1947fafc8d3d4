#include "spid/sim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace spid {

std::size_t ScenarioConfig::adversarial_chains() const
{
    return std::size_t(std::llround(adversary_fraction * double(N)));
}

double ScenarioConfig::mu_crit() const { return spid::mu_crit(K); }

void validate_config(const ScenarioConfig& c)
{
    auto fail = [](const std::string& field, const std::string& what) { throw ConfigError(field + ": " + what); };
    if (c.N < 1) fail("N", "must be at least 1");
    if (c.N > 64) fail("N", "at most 64 chains are supported");
    if (c.n < 1) fail("n", "must be at least 1");
    if (c.M < 1) fail("M", "must be at least 1");
    if (c.K < 1) fail("K", "must be at least 1");
    if (!(c.lambda >= 0 && c.lambda <= 1)) fail("lambda", "must lie in [0, 1]");
    if (!(c.eta > 0 && c.eta <= 1)) fail("eta", "must lie in (0, 1]");
    if (!(c.mu >= 0 && c.mu < 1)) fail("mu", "must lie in [0, 1)");
    if (!(c.adversary_fraction >= 0 && c.adversary_fraction <= 1))
        fail("adversary_fraction", "must lie in [0, 1]");
    if (c.mu > 0 && c.adversarial_chains() == 0) fail("adversary_fraction", "mu > 0 needs at least one adversarial chain");
    if (c.adversarial_chains() >= c.N && c.N > 0) fail("adversary_fraction", "at least one chain must be honest");
    if (!(c.gamma > 0)) fail("gamma", "must be positive");
    if (!(c.duration_min > 0)) fail("duration_min", "must be positive");
    if (!(c.link_latency_ms >= 0)) fail("link_latency_ms", "must be non-negative");
    if (!(c.bandwidth_mbps > 0)) fail("bandwidth_mbps", "must be positive");
    if (!(c.task_timeout_ms > 0)) fail("task_timeout_ms", "must be positive");
    if (!(c.vote_timeout_ms > 0)) fail("vote_timeout_ms", "must be positive");
    if (!c.genesis.empty() && c.genesis.size() != c.M) fail("genesis", "length must equal M");
    if (!(c.compute_ns_per_entry >= 0)) fail("compute_ns_per_entry", "must be non-negative");
    if (!(c.invalid_tx_fraction > 0 && c.invalid_tx_fraction <= 1)) fail("invalid_tx_fraction", "must lie in (0, 1]");
    if (!(c.spend_fraction >= 0 && c.spend_fraction <= 1)) fail("spend_fraction", "must lie in [0, 1]");
    if (!c.weights.empty()) {
        if (c.weights.size() != c.N) fail("weights", "length must equal N");
        for (double w : c.weights)
            if (!(w > 0)) fail("weights", "every weight must be positive");
    }
    if (c.ds_pairs > 0 && c.ds_regular == 0) fail("ds_regular", "must be positive when ds_pairs is set");
    if (!(c.tip_sample_s > 0)) fail("tip_sample_s", "must be positive");
    if (c.max_reassign_rounds < 1) fail("max_reassign_rounds", "must be at least 1");
}

std::optional<double> gini(const std::vector<double>& counts)
{
    double total = 0;
    for (double v : counts) {
        if (v < 0) throw PreconditionError("negative count");
        total += v;
    }
    if (counts.empty() || total <= 0) return std::nullopt;
    std::vector<double> s = counts;
    std::sort(s.begin(), s.end());
    const double n = double(s.size());
    double num = 0;
    for (std::size_t i = 0; i < s.size(); ++i) num += (2.0 * double(i) - n + 1.0) * s[i];
    return (2.0 * num) / (2.0 * n * total);
}

// ---------------------------------------------------------------------------

namespace {

ChainWeights weights_for(const ScenarioConfig& c)
{
    if (c.weights.empty()) return ChainWeights::equal(c.N);
    double sum = std::accumulate(c.weights.begin(), c.weights.end(), 0.0);
    std::vector<double> w;
    for (double x : c.weights) w.push_back(x / sum);
    return ChainWeights::from_values(w);
}

Bytes node_secret(uint64_t seed, ChainId chain, NodeId node)
{
    uint64_t s = derive_seed(seed, 0x5ec, chain, node);
    Bytes b(8);
    for (int i = 0; i < 8; ++i) b[i] = uint8_t(s >> (8 * i));
    return b;
}

Amount row_total(const Matrix& m, std::size_t r)
{
    Amount s = 0;
    for (std::size_t c = 0; c < m.cols; ++c) s += m(r, c);
    return s;
}

} // namespace

Simulation::Simulation(ScenarioConfig cfg)
    : cfg_(std::move(cfg)), dag_((validate_config(cfg_), weights_for(cfg_)), cfg_.eta),
      sb_rng_(derive_seed(cfg_.seed, 0x5b))
{
    const std::size_t adv = cfg_.adversarial_chains();
    auto genesis = genesis_vec();
    for (ChainId j = 0; j < cfg_.N; ++j) {
        Chain c;
        c.id = j;
        c.honest = j < cfg_.N - adv;
        if (c.honest) honest_mask_ |= 1ull << j;
        Rng srng(derive_seed(cfg_.seed, 2, j));
        auto p = draw_straggler_probabilities(cfg_.n, cfg_.M, cfg_.lambda, srng);
        c.plan = plan_groups(cfg_.n, cfg_.M, StragglerProfile::from_probabilities(p));
        c.nodes = make_chain_nodes(j, cfg_.n, p, c.honest);
        for (const auto& nd : c.nodes)
            if (nd.role == NodeRole::committee_eligible)
                c.stakes.push_back({nd.id, nd.stake, node_secret(cfg_.seed, j, nd.id)});
        c.stored.resize(cfg_.n);
        c.state = CumulativeState::init(genesis);
        c.pending_a = Matrix(cfg_.M, cfg_.M);
        c.pending_b = Matrix(cfg_.M, cfg_.M);
        c.worker_c = Matrix(cfg_.M, cfg_.M);
        c.rng = Rng(derive_seed(cfg_.seed, 1, j));
        chains_.push_back(std::move(c));
    }
    attach_pos_[DagLedger::kGenesis] = 0;
}

std::vector<Amount> Simulation::genesis_vec() const
{
    std::vector<Amount> g(cfg_.M, Amount(cfg_.genesis_balance));
    if (!cfg_.genesis.empty())
        for (std::size_t m = 0; m < cfg_.M; ++m) g[m] = Amount(cfg_.genesis[m]);
    return g;
}

Matrix Simulation::outflow_dense(const Block& b) const
{
    Matrix out(cfg_.M, cfg_.M);
    for (const auto& t : b)
        for (const auto& e : t.entries) out(e.row, e.col) += e.amount;
    return out;
}

SimTime Simulation::transfer_ns(std::size_t entries) const
{
    double bits = 64.0 * double(entries);
    return SimTime(std::llround(cfg_.link_latency_ms * 1e6 + bits / (cfg_.bandwidth_mbps * 1e6) * 1e9));
}

SimTime Simulation::compute_ns(std::size_t entries) const
{
    return SimTime(std::llround(cfg_.compute_ns_per_entry * double(entries)));
}

void Simulation::at(SimTime t, std::function<void()> fn)
{
    queue_.push(Ev{t, seq_++, std::move(fn)});
}

bool Simulation::step(SimTime limit)
{
    if (queue_.empty() || queue_.top().time >= limit) return false;
    Ev ev = queue_.top();
    queue_.pop();
    now_ = ev.time;
    ev.fn();
    return true;
}

std::optional<SimTime> Simulation::vote(ChainId j, EventKind kind, uint64_t digest)
{
    auto& c = chains_[j];
    const SimTime round_trip = SimTime(std::llround(2 * cfg_.link_latency_ms * 1e6));
    const SimTime limit = SimTime(std::llround(cfg_.vote_timeout_ms * 1e6));
    const bool late = round_trip > limit;
    const bool honest = c.honest;
    auto rec = propose_and_vote(
        kind, j, c.epoch, c.committee, [&](NodeId) { return digest; },
        [&](NodeId, NodeId, uint64_t p) { return !late && (!honest || p == digest); });
    c.pools.publish(rec);
    log_.push_back(event_log_line(rec));
    SimTime spent = SimTime(rec.attempts) * std::min(round_trip, limit);
    if (rec.outcome != Outcome::active) return std::nullopt;
    return now_ + spent;
}

void Simulation::arrival(ChainId j)
{
    auto& c = chains_[j];
    c.arrivals.push_back(now_);
    if (!c.busy) start_epoch(j);
}

void Simulation::start_epoch(ChainId j)
{
    auto& c = chains_[j];
    c.arrivals.pop_front();
    c.busy = true;
    ++c.epoch;
    c.has_block = false;
    c.valid.clear();
    c.zp.clear();
    c.committee = select_committee(c.stakes, epoch_seed(cfg_.seed, j, c.epoch), c.epoch, committee_size(cfg_.n));

    auto view = balances_with_proposal({}, c.state);
    if (c.honest) {
        c.xp = make_honest_block(c.rng, cfg_.M, view, j, cfg_.N, c.epoch, cfg_.tx_per_block, cfg_.spend_fraction);
    } else {
        AdversaryPolicy pol;
        pol.spam_rate = cfg_.mu;
        pol.invalid_tx_fraction = cfg_.invalid_tx_fraction;
        c.xp = make_invalid_block(c.rng, cfg_.M, pol, view, j, cfg_.N, c.epoch, cfg_.tx_per_block);
    }
    uint64_t digest = mix64(derive_seed(j, c.epoch, 1, c.xp.size()));
    auto t1 = vote(j, EventKind::X1, digest);
    if (!t1) {
        ++stage_timeouts_;
        at(now_ + SimTime(std::llround(cfg_.vote_timeout_ms * 1e6)), [this, j] { stage4(j); });
        return;
    }
    at(*t1, [this, j] { stage1_compute(j); });
}

Simulation::Collected Simulation::gather(Chain& c, const std::vector<WorkerTask>& tasks,
                                         const std::vector<std::size_t>& entries, SimTime start)
{
    Collected out;
    const SimTime timeout = SimTime(std::llround(cfg_.task_timeout_ms * 1e6));
    auto arrival = [&](std::size_t i, std::size_t out_entries, SimTime t0) {
        return t0 + transfer_ns(entries[i]) + compute_ns(entries[i]) + transfer_ns(out_entries);
    };
    auto out_entries = [&](std::size_t i) { return 2 * tasks[i].a.data.size(); };

    if (cfg_.coding_enabled) {
        std::vector<std::pair<SimTime, std::size_t>> order;
        for (std::size_t i = 0; i < tasks.size(); ++i) {
            if (c.nodes[tasks[i].worker].straggler()) continue;
            order.push_back({arrival(i, out_entries(i), start), i});
        }
        std::sort(order.begin(), order.end());
        std::vector<std::vector<uint32_t>> got(c.plan.groups.size());
        std::vector<bool> ok(c.plan.groups.size(), false);
        std::size_t ok_count = 0;
        for (std::size_t g = 0; g < ok.size(); ++g)
            if (decodable({}, c.plan.groups[g])) ok[g] = true, ++ok_count;
        if (ok_count == ok.size()) {
            out.done = start;
            return out;
        }
        for (auto& [t, i] : order) {
            if (t > start + timeout) break;
            out.task_index.push_back(i);
            out.responder.push_back(tasks[i].worker);
            auto g = tasks[i].group;
            got[g].push_back(tasks[i].position);
            if (!ok[g] && got[g].size() >= c.plan.groups[g].data_blocks() && decodable(got[g], c.plan.groups[g])) {
                ok[g] = true;
                if (++ok_count == ok.size()) {
                    out.done = t;
                    return out;
                }
            }
        }
        out.task_index.clear();
        out.responder.clear();
        return out;
    }

    // Plain partitions: wait for owners, then reassign what is missing.
    std::vector<std::optional<uint32_t>> responder(tasks.size());
    SimTime latest = start;
    SimTime round_start = start;
    for (uint32_t round = 0; round < cfg_.max_reassign_rounds; ++round) {
        const SimTime deadline = round_start + timeout;
        bool all = true;
        for (std::size_t i = 0; i < tasks.size(); ++i) {
            if (responder[i]) continue;
            uint32_t w = round == 0 ? tasks[i].worker : uint32_t(rand_below(c.rng, cfg_.n));
            // a reassigned worker also needs the stored partition
            std::size_t extra = round == 0 ? 0 : out_entries(i);
            if (c.nodes[w].straggler()) {
                all = false;
                continue;
            }
            SimTime t = round_start + transfer_ns(entries[i] + extra) + compute_ns(entries[i] + extra) +
                        transfer_ns(out_entries(i));
            if (t > deadline) {
                all = false;
                continue;
            }
            responder[i] = w;
            latest = std::max(latest, t);
        }
        if (all) {
            out.done = latest;
            for (std::size_t i = 0; i < tasks.size(); ++i) {
                out.task_index.push_back(i);
                out.responder.push_back(*responder[i]);
            }
            return out;
        }
        round_start = deadline;
    }
    return out;
}

void Simulation::stage1_compute(ChainId j)
{
    auto& c = chains_[j];
    Matrix xdense = outflow_dense(c.xp);
    Matrix dC = xdense - c.worker_c;
    auto tasks = assign_tasks(c.pending_a, c.pending_b, dC, c.plan, cfg_.coding_enabled);
    std::vector<std::size_t> entries;
    for (const auto& t : tasks) {
        if (worker_respond(c.nodes[t.worker], t, c.stored[t.worker]) && c.nodes[t.worker].straggler())
            ++straggler_msgs_;
        entries.push_back(t.entries());
    }
    c.pending_a = Matrix(cfg_.M, cfg_.M);
    c.pending_b = Matrix(cfg_.M, cfg_.M);
    c.worker_c = std::move(xdense);

    auto got = gather(c, tasks, entries, now_);
    if (!got.done) {
        ++stage_timeouts_;
        SimTime wait = SimTime(std::llround(cfg_.task_timeout_ms * 1e6)) *
                       (cfg_.coding_enabled ? 1 : SimTime(cfg_.max_reassign_rounds));
        at(now_ + wait, [this, j] { stage4(j); });
        return;
    }
    std::vector<WorkerResult> results;
    for (std::size_t k = 0; k < got.task_index.size(); ++k) {
        std::size_t i = got.task_index[k];
        const auto& t = tasks[i];
        const auto& st = c.stored[t.worker];
        results.push_back({got.responder[k], t.group, t.position, st.w_in, st.w_out});
    }
    auto genesis = genesis_vec();
    auto c2 = contract_c2(results, c.plan, cfg_.coding_enabled, genesis, c.xp);
    if (!c2) throw ConsistencyError("collected results not decodable");
    if (c2->balances != balances_with_proposal(c.xp, c.state))
        throw ConsistencyError("decoded balances differ from the central ledger");
    Block z = c.honest ? c2->proposed_block : c.xp;
    SimTime done = *got.done;
    at(done, [this, j, z = std::move(z)]() mutable {
        auto& ch = chains_[j];
        uint64_t digest = mix64(derive_seed(j, ch.epoch, 2, z.size()));
        auto t3 = vote(j, EventKind::X2, digest);
        if (!t3) {
            ++stage_timeouts_;
            at(now_ + SimTime(std::llround(cfg_.vote_timeout_ms * 1e6)), [this, j] { stage4(j); });
            return;
        }
        ch.zp = std::move(z);
        at(*t3, [this, j] {
            auto& cc = chains_[j];
            Matrix zd = outflow_dense(cc.zp);
            cc.state.w_out += zd;
            cc.state.w_out -= cc.state.last_proposed;
            cc.state.last_proposed = std::move(zd);
            cc.has_block = true;
            ++cc.produced;
            stage2(j);
        });
    });
}

std::vector<BlockId> Simulation::detect_double_spends(const std::vector<BlockId>& tips, ChainId chain, uint64_t epoch)
{
    std::vector<BlockId> pass;
    for (BlockId id : tips) {
        const auto& b = dag_.block(id);
        std::size_t pos = attach_pos_.at(id);
        bool dup = false;
        for (uint64_t tx : b.tx_ids) {
            auto it = first_tx_pos_.find(tx);
            if (it != first_tx_pos_.end() && it->second < pos) dup = true;
        }
        if (dup) {
            labels_.push_back({id, chain, epoch, std::nullopt});
            labelled_.insert(id);
        } else {
            pass.push_back(id);
        }
    }
    return pass;
}

void Simulation::stage2(ChainId j)
{
    auto& c = chains_[j];
    auto sampled = select_tips_honest(dag_, cfg_.K, c.rng);
    std::vector<BlockId> tips;
    std::set<ChainId> sources;
    for (BlockId id : sampled)
        if (sources.insert(dag_.block(id).proposer).second) tips.push_back(id);
    c.label_start = labels_.size();
    if (cfg_.ds_pairs > 0) tips = detect_double_spends(tips, j, c.epoch);

    uint64_t digest = mix64(derive_seed(j, c.epoch, 3, tips.size()));
    auto t4 = vote(j, EventKind::X3, digest);
    if (!t4) {
        ++stage_timeouts_;
        at(now_ + SimTime(std::llround(cfg_.vote_timeout_ms * 1e6)), [this, j] { stage3(j); });
        return;
    }
    at(*t4, [this, j, tips] {
        auto& ch = chains_[j];
        std::vector<BlockId> genesis_tips, checked;
        std::vector<TipPayload> payloads;
        std::vector<std::vector<WorkerTask>> per_tip;
        std::map<ChainId, std::vector<Amount>> gmap;
        std::map<ChainId, CumulativeState> states;
        auto g = genesis_vec();
        for (BlockId id : tips) {
            const auto& b = dag_.block(id);
            if (b.proposer == DagLedger::kNoChain) {
                genesis_tips.push_back(id);
                continue;
            }
            const auto& src = chains_[b.proposer].state;
            Matrix a = src.w_in;
            Matrix bo = src.w_out - src.last_proposed;
            per_tip.push_back(assign_tasks(a, bo, outflow_dense(b.payload), ch.plan, cfg_.coding_enabled));
            payloads.push_back({b.proposer, b.payload});
            checked.push_back(id);
            gmap[b.proposer] = g;
            states[b.proposer] = src;
        }
        auto finish = [this, j, genesis_tips, checked](std::vector<bool> verdict, SimTime when) {
            auto& cc = chains_[j];
            cc.valid = genesis_tips;
            for (std::size_t i = 0; i < checked.size(); ++i)
                if (verdict[i]) cc.valid.push_back(checked[i]);
            std::sort(cc.valid.begin(), cc.valid.end());
            at(when, [this, j] {
                uint64_t d = mix64(derive_seed(j, chains_[j].epoch, 4, chains_[j].valid.size()));
                auto t6 = vote(j, EventKind::X4, d);
                at(t6 ? *t6 : now_ + SimTime(std::llround(cfg_.vote_timeout_ms * 1e6)), [this, j] { stage3(j); });
            });
        };
        if (per_tip.empty()) {
            finish({}, now_);
            return;
        }
        // one message per worker carrying every tip's shard
        const auto& base = per_tip.front();
        std::vector<std::size_t> entries(base.size(), 0);
        for (const auto& tt : per_tip)
            for (std::size_t u = 0; u < tt.size(); ++u) entries[u] += tt[u].entries();
        auto got = gather(ch, base, entries, now_);
        if (!got.done) {
            ++stage_timeouts_;
            SimTime wait = SimTime(std::llround(cfg_.task_timeout_ms * 1e6)) *
                           (cfg_.coding_enabled ? 1 : SimTime(cfg_.max_reassign_rounds));
            chains_[j].valid = genesis_tips;
            at(now_ + wait, [this, j] { stage3(j); });
            return;
        }
        std::vector<std::vector<WorkerResult>> results(per_tip.size());
        for (std::size_t i = 0; i < per_tip.size(); ++i)
            for (std::size_t k = 0; k < got.task_index.size(); ++k) {
                const auto& t = per_tip[i][got.task_index[k]];
                StoredShards zero{Matrix(t.a.rows, t.a.cols), Matrix(t.a.rows, t.a.cols)};
                auto s = worker_update(zero, ShardTriple{t.worker, t.position, t.group, t.a, t.b, t.dc});
                results[i].push_back({got.responder[k], t.group, t.position, std::move(s.w_in), std::move(s.w_out)});
            }
        auto verdict = contract_c4(results, ch.plan, cfg_.coding_enabled, payloads, gmap);
        if (!verdict) throw ConsistencyError("tip results not decodable");
        if (*verdict != validate_tip_payloads(payloads, states))
            throw ConsistencyError("coded tip verdicts differ from the central check");
        finish(*verdict, *got.done);
    });
}

void Simulation::stage3(ChainId j)
{
    auto& c = chains_[j];
    if (!c.has_block) {
        stage4(j);
        return;
    }
    uint64_t digest = mix64(derive_seed(j, c.epoch, 5, c.valid.size()));
    auto t7 = vote(j, EventKind::X5, digest);
    if (!t7) {
        ++stage_timeouts_;
        at(now_ + SimTime(std::llround(cfg_.vote_timeout_ms * 1e6)), [this, j] { stage4(j); });
        return;
    }
    at(*t7 + SimTime(std::llround(cfg_.link_latency_ms * 1e6)), [this, j] { attach_block(j); });
}

void Simulation::attach_block(ChainId j)
{
    auto& c = chains_[j];
    std::vector<BlockId> parents =
        c.honest ? c.valid : select_tips_orphanage(dag_, cfg_.K, j, c.rng);
    DagBlock b;
    b.id = next_id_++;
    b.proposer = j;
    b.epoch_issued = c.epoch;
    b.payload = c.zp;
    b.tx_ids = {next_tx_++};
    b.attach_time = now_;
    const BlockId id = b.id;
    const auto txs = b.tx_ids;
    contract_c5_submit(dag_, std::move(b), parents);
    attach_pos_[id] = dag_.order().size() - 1;
    for (uint64_t tx : txs) first_tx_pos_.emplace(tx, attach_pos_[id]);
    if (!c.honest) adversarial_ids_.insert(id);
    for (std::size_t k = c.label_start; k < labels_.size(); ++k)
        if (labels_[k].chain == j && labels_[k].epoch == c.epoch) labels_[k].labeller_block = id;
    contract_c5_update(dag_, now_, int64_t(superblocks_.size() + 1));

    uint64_t digest = mix64(derive_seed(j, c.epoch, 6, id));
    auto t8 = vote(j, EventKind::X6, digest);
    at(t8 ? *t8 : now_ + SimTime(std::llround(cfg_.vote_timeout_ms * 1e6)), [this, j] { stage4(j); });
}

void Simulation::stage4(ChainId j)
{
    auto& c = chains_[j];
    uint64_t digest = mix64(derive_seed(j, c.epoch, 7, c.ledger.size()));
    auto t9 = vote(j, EventKind::X7, digest);
    if (!t9) {
        ++stage_timeouts_;
        at(now_ + SimTime(std::llround(cfg_.vote_timeout_ms * 1e6)), [this, j] { finish_epoch(j); });
        return;
    }
    at(*t9, [this, j] {
        auto& cc = chains_[j];
        std::size_t k = cc.ledger.size();
        if (superblocks_.size() == k) {
            superblocks_.push_back(
                assemble_confirmed_superblock(dag_, int64_t(k + 1), sb_rng_, labelled_));
        }
        cc.ledger.push_back(superblocks_[k]);
        std::vector<TransactionMatrix> in, out;
        for (const auto& [chain, bid] : superblocks_[k])
            for (const auto& t : dag_.block(bid).payload) {
                if (t.dest == j) in.push_back(t);
                if (t.source == j) out.push_back(t);
            }
        auto f = aggregate_flows(in, out, {}, j, cfg_.M, cc.epoch);
        cc.state.w_in += f.inflow;
        cc.state.w_out += f.outflow_confirmed;
        cc.pending_a += f.inflow;
        cc.pending_b += f.outflow_confirmed;
        finish_epoch(j);
    });
}

void Simulation::finish_epoch(ChainId j)
{
    auto& c = chains_[j];
    drain_pool(c.pools, c.epoch);
    c.busy = false;
    if (!c.arrivals.empty()) start_epoch(j);
}

void Simulation::run_epoch(ChainId j)
{
    auto& c = chains_.at(j);
    const uint64_t target = c.epoch + 1;
    at(now_, [this, j] { arrival(j); });
    while (!(chains_[j].epoch >= target && !chains_[j].busy))
        if (!step(INT64_MAX)) break;
}

void Simulation::inject_double_spends(std::size_t pairs, std::size_t regular, Rng& rng)
{
    if (pairs == 0) throw PreconditionError("pairs must be at least 1");
    std::vector<SimTime> honest_times;
    Rng srng(derive_seed(cfg_.seed, 0x15));
    std::size_t H = cfg_.N - cfg_.adversarial_chains();
    for (auto& v : schedule_issuance((1 - cfg_.mu) * cfg_.gamma, H, cfg_.duration_min, srng))
        honest_times.insert(honest_times.end(), v.begin(), v.end());
    std::sort(honest_times.begin(), honest_times.end());
    SimTime window = honest_times.empty() ? end_ : honest_times[std::min(regular, honest_times.size()) - 1];
    truth_.inject.resize(pairs);
    truth_.blocks.resize(pairs);
    for (std::size_t p = 0; p < pairs; ++p) {
        uint64_t tx = next_tx_++;
        SimTime ts[2];
        for (int k = 0; k < 2; ++k) ts[k] = SimTime(rand_unit(rng) * double(window));
        truth_.inject[p] = {std::min(ts[0], ts[1]), std::max(ts[0], ts[1])};
        for (int k = 0; k < 2; ++k) {
            ChainId proposer = ChainId(rand_below(rng, H));
            uint64_t pick = rng();
            at(ts[k], [this, p, tx, proposer, pick] {
                Rng r(pick);
                // recent blocks outside the adversarial chains
                std::vector<BlockId> pool;
                const auto& ord = dag_.order();
                for (auto it = ord.rbegin(); it != ord.rend() && pool.size() < 10; ++it)
                    if (!adversarial_ids_.count(*it)) pool.push_back(*it);
                std::vector<BlockId> parents;
                for (std::size_t i = 0; i < std::min(cfg_.K, pool.size()); ++i) {
                    std::size_t q = i + rand_below(r, pool.size() - i);
                    std::swap(pool[i], pool[q]);
                    parents.push_back(pool[i]);
                }
                if (parents.empty()) parents.push_back(DagLedger::kGenesis);
                std::sort(parents.begin(), parents.end());
                DagBlock b;
                b.id = next_id_++;
                b.proposer = proposer;
                b.tx_ids = {tx};
                b.parents = parents;
                b.attach_time = now_;
                const BlockId id = b.id;
                dag_.attach(std::move(b));
                attach_pos_[id] = dag_.order().size() - 1;
                first_tx_pos_.emplace(tx, attach_pos_[id]);
                truth_.pair_of[id] = p;
                auto& slot = truth_.blocks[p];
                if (slot.first == 0) slot.first = id; else slot.second = id;
                dag_.update_confirmations(now_, int64_t(superblocks_.size() + 1));
            });
        }
    }
}

void Simulation::run()
{
    end_ = SimTime(std::llround(cfg_.duration_min * 60e9));
    Rng srng(derive_seed(cfg_.seed, 0x15));
    const std::size_t adv = cfg_.adversarial_chains();
    const std::size_t H = cfg_.N - adv;
    auto hs = schedule_issuance((1 - cfg_.mu) * cfg_.gamma, H, cfg_.duration_min, srng);
    auto as = schedule_issuance(cfg_.mu * cfg_.gamma, adv, cfg_.duration_min, srng);
    for (std::size_t k = 0; k < H; ++k)
        for (SimTime t : hs[k]) at(t, [this, j = ChainId(k)] { arrival(j); });
    for (std::size_t k = 0; k < adv; ++k)
        for (SimTime t : as[k]) at(t, [this, j = ChainId(H + k)] { arrival(j); });
    const SimTime step_ns = SimTime(std::llround(cfg_.tip_sample_s * 1e9));
    for (SimTime t = 0; t < end_; t += step_ns)
        at(t, [this] { tip_series_.push_back({double(now_) / 1e9, dag_.tips().size()}); });
    if (cfg_.ds_pairs > 0) {
        Rng irng(derive_seed(cfg_.seed, 0xd5));
        inject_double_spends(cfg_.ds_pairs, cfg_.ds_regular, irng);
    }
    while (step(end_)) {
    }
    now_ = end_;
    tip_series_.push_back({double(end_) / 1e9, dag_.tips().size()});
}

bool Simulation::conservation_holds() const
{
    Amount recv_state = 0, sent_state = 0;
    for (const auto& c : chains_) {
        for (std::size_t r = 0; r < cfg_.M; ++r) {
            sent_state += row_total(c.state.w_out, r) - row_total(c.state.last_proposed, r);
            for (std::size_t col = 0; col < cfg_.M; ++col) recv_state += c.state.w_in(r, col);
        }
    }
    Amount recv_log = 0, sent_log = 0;
    for (std::size_t i = 0; i < superblocks_.size(); ++i)
        for (const auto& [chain, bid] : superblocks_[i])
            for (const auto& t : dag_.block(bid).payload) {
                if (chains_[t.source].ledger.size() > i) sent_log += t.total();
                if (chains_[t.dest].ledger.size() > i) recv_log += t.total();
            }
    Amount genesis_total = 0;
    for (Amount g : genesis_vec()) genesis_total += g;
    genesis_total *= Amount(cfg_.N);
    Amount held = 0;
    for (const auto& c : chains_)
        for (Amount v : net_balances(c.state)) held += v;
    Amount reserved = 0;
    for (const auto& c : chains_)
        for (std::size_t r = 0; r < cfg_.M; ++r) reserved += row_total(c.state.last_proposed, r);
    const Amount in_transit = sent_log - recv_log;
    return recv_state == recv_log && sent_state == sent_log && held + reserved + in_transit == genesis_total;
}

MetricsReport Simulation::report() const
{
    MetricsReport r;
    r.config = cfg_;
    const SimTime end = end_ > 0 ? end_ : now_;
    const double minutes = double(end) / 60e9;
    const std::size_t bins = std::max<std::size_t>(1, std::size_t(std::ceil(minutes - 1e-9)));

    std::size_t produced = 0;
    for (const auto& c : chains_) produced += c.produced;
    r.intra_throughput = minutes > 0 ? double(produced) / double(cfg_.N) / minutes : 0;

    std::vector<std::vector<double>> per_bin(bins, std::vector<double>(cfg_.N, 0));
    r.throughput_per_minute.assign(bins, 0);
    std::size_t inter = 0;
    double fin_sum = 0;
    for (BlockId id : dag_.order()) {
        const auto& b = dag_.block(id);
        if (id == DagLedger::kGenesis) continue;
        const bool injected = truth_.pair_of.count(id) != 0;
        const bool adversarial = adversarial_ids_.count(id) != 0;
        if (!injected) {
            if (adversarial) ++r.adversarial_blocks; else ++r.honest_blocks;
        }
        if (b.status != BlockStatus::confirmed || !b.confirm_time || *b.confirm_time >= end) continue;
        double fin = double(*b.confirm_time - b.attach_time) / 1e9;
        r.finality_samples.push_back({id, fin});
        fin_sum += fin;
        std::size_t bin = std::min(bins - 1, std::size_t(double(*b.confirm_time) / 60e9));
        if (injected) continue;
        per_bin[bin][b.proposer] += 1;
        if (adversarial) {
            ++r.adversarial_confirmed;
            continue;
        }
        if (dag_.meets_eta(dag_.weight_units(b.approver_chains & honest_mask_))) {
            ++inter;
            ++r.throughput_per_minute[bin];
        }
    }
    r.inter_throughput = minutes > 0 ? double(inter) / minutes : 0;
    if (!r.finality_samples.empty()) r.mean_finality_s = fin_sum / double(r.finality_samples.size());
    double gsum = 0;
    std::size_t gcount = 0;
    for (const auto& counts : per_bin) {
        auto g = gini(counts);
        r.gini_series.push_back(g);
        if (g) gsum += *g, ++gcount;
    }
    if (gcount) r.gini_mean = gsum / double(gcount);
    r.tip_pool_series = tip_series_;
    r.final_tip_pool = dag_.tips().size();

    auto& ds = r.double_spend;
    ds.pairs = truth_.inject.size();
    ds.regular = r.honest_blocks + r.adversarial_blocks;
    std::set<BlockId> false_labels;
    std::map<std::size_t, double> pair_delay;
    for (const auto& l : labels_) {
        auto it = truth_.pair_of.find(l.tip);
        if (it == truth_.pair_of.end()) {
            false_labels.insert(l.tip);
            continue;
        }
        if (!l.labeller_block) continue;
        const auto& lb = dag_.block(*l.labeller_block);
        if (!lb.confirm_time || *lb.confirm_time >= end) continue;
        std::size_t p = it->second;
        SimTime injected_at = dag_.block(l.tip).attach_time;
        double d = double(*lb.confirm_time - injected_at) / 1e9;
        auto pd = pair_delay.find(p);
        if (pd == pair_delay.end() || d < pd->second) pair_delay[p] = d;
    }
    ds.detected_pairs = pair_delay.size();
    ds.false_alarms = false_labels.size();
    ds.p_d = ds.pairs ? double(ds.detected_pairs) / double(ds.pairs) : 0;
    ds.p_fa = ds.regular ? double(ds.false_alarms) / double(ds.regular) : 0;
    if (!pair_delay.empty()) {
        double s = 0;
        for (auto& [p, d] : pair_delay) s += d;
        ds.mean_delay_s = s / double(pair_delay.size());
    }

    r.stage_timeouts = stage_timeouts_;
    r.straggler_messages = straggler_msgs_;
    r.superblocks = superblocks_.size();
    r.conservation_ok = conservation_holds();
    bool consistent = true;
    for (const auto& c : chains_)
        for (std::size_t i = 0; i < c.ledger.size(); ++i)
            if (i >= superblocks_.size() || c.ledger[i] != superblocks_[i]) consistent = false;
    r.ledgers_consistent = consistent;
    return r;
}

MetricsReport run_scenario(const ScenarioConfig& cfg, ScenarioArtifacts* artifacts)
{
    Simulation sim(cfg);
    sim.run();
    if (artifacts) {
        artifacts->event_log = sim.event_log();
        artifacts->dag_snapshot = sim.dag().snapshot();
    }
    return sim.report();
}

} // namespace spid
