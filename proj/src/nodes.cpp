#include "spid/nodes.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace spid {

std::vector<double> draw_straggler_probabilities(uint32_t n, std::size_t M, double lambda, Rng& rng)
{
    std::vector<double> p(n, 0.0);
    if (n == 0) return p;
    auto base = plan_groups(n, M, StragglerProfile::from_probabilities(std::vector<double>(n, lambda)));
    std::size_t want = std::size_t(std::llround(lambda * double(n)));
    std::size_t placed = 0;
    for (const auto& g : base.groups) {
        std::vector<uint32_t> m = g.members;
        for (std::size_t i = 0; i < g.frozen.size(); ++i) {
            std::size_t k = i + rand_below(rng, m.size() - i);
            std::swap(m[i], m[k]);
            p[m[i]] = 1.0;
            ++placed;
        }
    }
    std::vector<uint32_t> rest;
    for (uint32_t k = 0; k < n; ++k)
        if (p[k] == 0.0) rest.push_back(k);
    for (std::size_t i = 0; placed < want && i < rest.size(); ++i, ++placed) {
        std::size_t k = i + rand_below(rng, rest.size() - i);
        std::swap(rest[i], rest[k]);
        p[rest[i]] = 1.0;
    }
    return p;
}

std::vector<NodeSpec> make_chain_nodes(ChainId chain, uint32_t n, const std::vector<double>& straggler_p, bool honest)
{
    if (straggler_p.size() != n) throw PreconditionError("straggler vector length differs from n");
    std::vector<NodeSpec> out;
    for (uint32_t k = 0; k < n; ++k) out.push_back({k, chain, NodeRole::worker, 1, straggler_p[k], honest});
    for (uint32_t k = 0; k < n; ++k) out.push_back({n + k, chain, NodeRole::committee_eligible, 1, 0.0, honest});
    return out;
}

std::optional<WorkerResult> worker_respond(const NodeSpec& node, const WorkerTask& task, StoredShards& stored)
{
    if (node.role != NodeRole::worker) throw PreconditionError("task sent to a non-worker node");
    if (stored.w_in.rows == 0) {
        stored.w_in = Matrix(task.a.rows, task.a.cols);
        stored.w_out = Matrix(task.a.rows, task.a.cols);
    }
    stored = worker_update(stored, ShardTriple{task.worker, task.position, task.group, task.a, task.b, task.dc});
    if (node.straggler()) return std::nullopt;
    return WorkerResult{task.worker, task.group, task.position, stored.w_in, stored.w_out};
}

namespace {

ChainId random_dest(Rng& rng, ChainId source, std::size_t N)
{
    ChainId d = ChainId(rand_below(rng, N - 1));
    return d >= source ? d + 1 : d;
}

void add_tx(Block& blk, ChainId source, ChainId dest, uint64_t epoch, std::size_t M, uint32_t row, uint32_t col,
            Amount amount)
{
    auto it = std::find_if(blk.begin(), blk.end(), [&](const TransactionMatrix& t) { return t.dest == dest; });
    if (it == blk.end()) {
        blk.emplace_back(source, dest, epoch, M);
        it = blk.end() - 1;
    }
    it->add(row, col, amount);
}

void sort_block(Block& blk)
{
    std::sort(blk.begin(), blk.end(), [](auto& a, auto& b) { return a.dest < b.dest; });
}

} // namespace

Block make_honest_block(Rng& rng, std::size_t M, const std::vector<Amount>& balance_view, ChainId source, std::size_t N,
                        uint64_t epoch, std::size_t tx_count, double spend_fraction)
{
    Block blk;
    if (N < 2 || M == 0) return blk;
    std::vector<Amount> budget(M, 0);
    for (std::size_t m = 0; m < M; ++m)
        if (balance_view[m] > 0) budget[m] = Amount(std::floor(double(balance_view[m]) * spend_fraction));
    for (std::size_t k = 0; k < tx_count; ++k) {
        uint32_t row = uint32_t(rand_below(rng, M));
        ChainId dest = random_dest(rng, source, N);
        uint32_t col = uint32_t(rand_below(rng, M));
        if (budget[row] <= 0) continue;
        uint64_t cap = uint64_t(std::min<Amount>(budget[row], Amount(UINT64_MAX / 2)));
        Amount amt = 1 + Amount(rand_below(rng, cap));
        budget[row] -= amt;
        add_tx(blk, source, dest, epoch, M, row, col, amt);
    }
    sort_block(blk);
    return blk;
}

Block make_invalid_block(Rng& rng, std::size_t M, const AdversaryPolicy& policy, const std::vector<Amount>& balance_view,
                         ChainId source, std::size_t N, uint64_t epoch, std::size_t tx_count,
                         std::vector<uint32_t>* tampered)
{
    if (policy.invalid_tx_fraction <= 0 || policy.invalid_tx_fraction > 1)
        throw PreconditionError("invalid_tx_fraction must lie in (0, 1]");
    Block blk = make_honest_block(rng, M, balance_view, source, N, epoch, tx_count, 0.05);
    if (N < 2 || M == 0) return blk;
    std::vector<uint32_t> active;
    for (const auto& t : blk)
        for (const auto& e : t.entries) active.push_back(e.row);
    std::sort(active.begin(), active.end());
    active.erase(std::unique(active.begin(), active.end()), active.end());
    std::size_t count = std::size_t(std::floor(policy.invalid_tx_fraction * double(active.size()) + 1e-9));
    if (active.empty()) {
        active.push_back(uint32_t(rand_below(rng, M)));
        count = 1;
    }
    for (std::size_t i = 0; i < count; ++i) {
        std::size_t k = i + rand_below(rng, active.size() - i);
        std::swap(active[i], active[k]);
    }
    std::vector<uint32_t> rows(active.begin(), active.begin() + std::ptrdiff_t(count));
    std::sort(rows.begin(), rows.end());
    for (uint32_t r : rows) {
        Amount bal = std::max<Amount>(balance_view[r], 0);
        add_tx(blk, source, random_dest(rng, source, N), epoch, M, r, uint32_t(rand_below(rng, M)), 2 * bal + 1);
    }
    sort_block(blk);
    if (tampered) *tampered = rows;
    return blk;
}

std::vector<std::vector<int64_t>> schedule_issuance(double rate_per_min, std::size_t chains, double minutes, Rng& rng)
{
    std::vector<std::vector<int64_t>> out(chains);
    if (chains == 0 || rate_per_min <= 0 || minutes <= 0) return out;
    std::size_t total = std::size_t(std::llround(rate_per_min * minutes));
    auto counts = apportion(total, std::vector<double>(chains, double(total) / double(chains)));
    const double span = minutes * 60e9;
    for (std::size_t c = 0; c < chains; ++c) {
        double phase = rand_unit(rng);
        for (std::size_t k = 0; k < counts[c]; ++k)
            out[c].push_back(int64_t((double(k) + phase) * span / double(counts[c])));
    }
    return out;
}

double mu_crit(std::size_t K)
{
    if (K == 0) throw PreconditionError("K must be positive");
    return double(K - 1) / double(K);
}

} // namespace spid
