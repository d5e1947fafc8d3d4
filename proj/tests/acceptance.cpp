// Acceptance checks 1-9. One line per criterion; exit status 1 if any fails.
#include "oracles.hpp"
#include "spid/config.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>

using namespace spid;
namespace fs = std::filesystem;

namespace {

constexpr int kSeeds = 10;
constexpr double kLimit1 = 10, kLimit2 = 10, kLimit3 = 20, kLimit4 = 180, kLimit5 = 120, kLimit7 = 120;
constexpr double kLimit8 = 15 * 60;
constexpr double kGiniReference = 0.5;
constexpr double kCodedSlack = 0.25;
constexpr double kMaxFalseAlarm = 0.05, kMinDetection = 0.9;

struct Verdict {
    bool pass = false;
    std::string detail;
};

// every simulation run in this binary, for the conservation criterion
std::vector<std::pair<std::string, bool>> g_conservation;

MetricsReport run(ScenarioConfig c, uint64_t seed)
{
    c.seed = seed;
    auto r = run_scenario(c);
    g_conservation.push_back({c.name + "/" + std::to_string(seed), r.conservation_ok && r.ledgers_consistent});
    return r;
}

ScenarioConfig desk()
{
    ScenarioConfig c;
    c.N = 10;
    c.n = 20;
    c.M = 100;
    return c;
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0)
{
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c, d);
    return buf;
}

// ---------------------------------------------------------------- 1

StragglerProfile profile_with(uint32_t n, const std::vector<uint32_t>& stragglers)
{
    std::vector<double> p(n, 0.0);
    for (auto s : stragglers) p[s] = 1.0;
    return StragglerProfile::from_probabilities(p);
}

Verdict coding_round_trip()
{
    std::mt19937_64 rng(101);
    std::size_t trials = 0, bad = 0;
    for (uint32_t n : {2u, 4u, 8u, 16u})
        for (double lam : {0.0, 0.25, 0.5})
            for (int t = 0; t < 200; ++t) {
                std::vector<uint32_t> idx(n);
                for (uint32_t i = 0; i < n; ++i) idx[i] = i;
                std::shuffle(idx.begin(), idx.end(), rng);
                std::vector<uint32_t> S(idx.begin(), idx.begin() + std::lround(lam * n));
                auto g = plan_groups(n, 2 * n, profile_with(n, S)).groups.at(0);
                auto x = oracle::random_matrix(rng, g.rows, 5, -1000000, 1000000);
                auto coded = encode_group(x, g);
                std::map<uint32_t, Matrix> rec;
                for (uint32_t w = 0; w < n; ++w) {
                    // a random subset of the frozen workers is lost
                    if (g.is_frozen(w) && rng() % 2) continue;
                    uint32_t p = g.position[w];
                    rec[p] = coded.slice_rows(p * g.block_rows, g.block_rows);
                }
                ++trials;
                try {
                    if (!(decode(rec, g) == x)) ++bad;
                } catch (const std::exception&) {
                    ++bad;
                }
            }
    std::size_t patterns = 0, disagree = 0;
    for (uint32_t n : {2u, 4u, 8u})
        for (uint32_t fm = 0; fm < (1u << n); ++fm) {
            std::vector<uint32_t> S;
            for (uint32_t i = 0; i < n; ++i)
                if (fm >> i & 1) S.push_back(i);
            if (S.size() == n) continue;
            auto g = plan_groups(n, 2 * n, profile_with(n, S)).groups.at(0);
            std::vector<uint32_t> data;
            for (uint32_t i = 0; i < n; ++i)
                if (!g.is_frozen(i)) data.push_back(i);
            for (uint32_t rm = 0; rm < (1u << n); ++rm) {
                std::vector<uint32_t> recv;
                for (uint32_t i = 0; i < n; ++i)
                    if (rm >> i & 1) recv.push_back(i);
                ++patterns;
                if (decodable(recv, g) != (oracle::h_rank(recv, data) == data.size())) ++disagree;
            }
        }
    return {bad == 0 && disagree == 0,
            std::to_string(trials - bad) + "/" + std::to_string(trials) + " exact round trips, " +
                std::to_string(disagree) + " rank disagreements over " + std::to_string(patterns) + " patterns"};
}

// ---------------------------------------------------------------- 2

Verdict ledger_equivalence()
{
    const std::size_t M = 100;
    const uint32_t n = 20;
    std::size_t ok = 0, runs = 0;
    for (uint64_t seed = 1; seed <= kSeeds; ++seed)
        for (bool coded : {true, false}) {
            Rng rng(derive_seed(seed, 0xacc2));
            std::mt19937_64 mrng(seed);
            auto p = coded ? draw_straggler_probabilities(n, M, 0.1, rng) : std::vector<double>(n, 0.0);
            auto plan = plan_groups(n, M, StragglerProfile::from_probabilities(p));
            auto nodes = make_chain_nodes(0, n, p, true);
            std::map<uint32_t, StoredShards> stored;
            Matrix sumA(M, M), sumB(M, M), lastC(M, M);
            bool all = true;
            for (int e = 1; e <= 20; ++e) {
                auto A = oracle::random_matrix(mrng, M, M, 0, 1000);
                auto B = oracle::random_matrix(mrng, M, M, 0, 1000);
                auto C = oracle::random_matrix(mrng, M, M, 0, 1000);
                Matrix dC = C - lastC;
                sumA += A;
                sumB += B;
                lastC = C;
                std::vector<WorkerResult> results;
                for (const auto& task : assign_tasks(A, B, dC, plan, coded)) {
                    auto it = stored.find(task.worker);
                    if (it == stored.end())
                        it = stored.emplace(task.worker, StoredShards{Matrix(task.a.rows, M), Matrix(task.a.rows, M)}).first;
                    if (auto r = worker_respond(nodes.at(task.worker), task, it->second)) results.push_back(*r);
                }
                auto dec = collect_results(results, plan, coded);
                all = all && dec && dec->w_in == sumA && dec->w_out == sumB + lastC;
            }
            ++runs;
            ok += all;
        }
    return {ok == runs, std::to_string(ok) + "/" + std::to_string(runs) + " seed-mode traces exact over 20 epochs"};
}

// ---------------------------------------------------------------- 3

DagBlock mk(BlockId id, ChainId c, std::vector<BlockId> parents, SimTime t = 0)
{
    DagBlock b;
    b.id = id;
    b.proposer = c;
    b.parents = std::move(parents);
    b.attach_time = t;
    return b;
}

// transitive closure by repeated scanning
double brute_aw(const DagLedger& L, BlockId target)
{
    const auto& tb = L.block(target);
    if (tb.proposer == DagLedger::kNoChain) return 1.0;
    std::set<BlockId> approvers;
    for (bool grew = true; grew;) {
        grew = false;
        for (auto id : L.order()) {
            if (approvers.count(id)) continue;
            for (auto p : L.block(id).parents)
                if (p == target || approvers.count(p)) {
                    approvers.insert(id);
                    grew = true;
                    break;
                }
        }
    }
    std::set<ChainId> chains{tb.proposer};
    for (auto a : approvers) chains.insert(L.block(a).proposer);
    double s = 0;
    for (auto c : chains) s += L.weights().value(c);
    return s;
}

Verdict aw_equivalence()
{
    Rng rng(303);
    std::size_t blocks = 0, mismatch = 0;
    for (int trial = 0; trial < 100; ++trial) {
        std::size_t N = 2 + rand_below(rng, 15);
        DagLedger L(ChainWeights::equal(N), 0.67);
        std::size_t nb = 1 + rand_below(rng, 200);
        for (BlockId id = 1; id <= nb; ++id) {
            std::vector<BlockId> ps;
            for (std::size_t j = 0, k = 1 + rand_below(rng, 4); j < k; ++j) ps.push_back(rand_below(rng, id));
            std::sort(ps.begin(), ps.end());
            ps.erase(std::unique(ps.begin(), ps.end()), ps.end());
            L.attach(mk(id, ChainId(rand_below(rng, N)), ps, SimTime(id)));
            L.update_confirmations(SimTime(id), int64_t(id));
        }
        for (auto id : L.order()) {
            ++blocks;
            if (std::fabs(L.aggregated_weight(id) - brute_aw(L, id)) > 1e-9) ++mismatch;
        }
    }
    // two-epoch reference construction
    std::vector<double> w{0.10, 0.15, 0.20, 0.10, 0.25, 0.20};
    DagLedger F(ChainWeights::from_values(w), 0.67);
    F.attach(mk(1, 0, {0}, 1));
    F.attach(mk(2, 1, {1}, 2));
    F.attach(mk(3, 2, {1}, 2));
    F.attach(mk(4, 3, {1}, 2));
    F.update_confirmations(3, 1);
    auto near = [](double a, double b) { return std::fabs(a - b) < 1e-9; };
    bool fig = near(F.aggregated_weight(1), w[0] + w[1] + w[2] + w[3]) &&
               F.block(1).status == BlockStatus::unconfirmed && F.tips() == std::set<BlockId>{2, 3, 4};
    F.attach(mk(5, 4, {2, 3}, 4));
    F.attach(mk(6, 5, {4}, 4));
    F.update_confirmations(5, 2);
    fig = fig && near(F.aggregated_weight(1), 1.0) && F.block(1).status == BlockStatus::confirmed &&
          F.tips() == std::set<BlockId>{5, 6} && F.block(2).status == BlockStatus::unconfirmed &&
          F.block(3).status == BlockStatus::unconfirmed && F.block(4).status == BlockStatus::unconfirmed &&
          F.block(5).status == BlockStatus::tip && F.block(6).status == BlockStatus::tip;
    return {mismatch == 0 && fig, std::to_string(blocks - mismatch) + "/" + std::to_string(blocks) +
                                      " blocks agree; two-epoch construction " + (fig ? "reproduced" : "differs")};
}

// ---------------------------------------------------------------- 4

ScenarioConfig attack(std::size_t K, double mu)
{
    auto c = desk();
    c.K = K;
    c.mu = mu;
    c.adversary_fraction = 0.2;
    c.gamma = 60;
    c.duration_min = 4;
    c.name = "attack-K" + std::to_string(K) + "-mu" + std::to_string(mu);
    return c;
}

Verdict tip_pool_growth()
{
    int grows = 0, milder = 0;
    std::ostringstream pools;
    for (uint64_t s = 1; s <= kSeeds; ++s) {
        double a = double(run(attack(2, 0.35), s).final_tip_pool);
        double b = double(run(attack(2, 0.55), s).final_tip_pool);
        double c = double(run(attack(4, 0.60), s).final_tip_pool);
        double d = double(run(attack(4, 0.80), s).final_tip_pool);
        grows += b > a;
        // an empty denominator pool counts as one tip
        milder += d / std::max(c, 1.0) < b / std::max(a, 1.0);
        pools << (s > 1 ? " " : "") << a << "/" << b << "|" << c << "/" << d;
    }
    return {grows >= 9 && milder >= 8, "K=2 grows in " + std::to_string(grows) + "/10 (need 9), K=4 milder in " +
                                           std::to_string(milder) + "/10 (need 8); pools " + pools.str()};
}

// ---------------------------------------------------------------- 5

Verdict straggler_benefit()
{
    auto cfg = [](double lambda, bool coded) {
        auto c = desk();
        c.lambda = lambda;
        c.coding_enabled = coded;
        c.gamma = 600;
        c.duration_min = 0.5;
        c.name = "straggler";
        return c;
    };
    int wins = 0;
    double coded1 = 0, coded3 = 0, unc1 = 0, unc3 = 0;
    for (uint64_t s = 1; s <= kSeeds; ++s) {
        double c3 = run(cfg(0.3, true), s).intra_throughput;
        double u3 = run(cfg(0.3, false), s).intra_throughput;
        coded1 += run(cfg(0.1, true), s).intra_throughput;
        unc1 += run(cfg(0.1, false), s).intra_throughput;
        coded3 += c3;
        unc3 += u3;
        wins += c3 > u3;
    }
    double coded_drop = 1 - coded3 / coded1, unc_drop = 1 - unc3 / unc1;
    bool pass = wins == kSeeds && coded_drop <= kCodedSlack && unc_drop > coded_drop;
    return {pass, std::to_string(wins) + "/10 coded wins; coded drop " + fmt("%.3f", coded_drop) + ", uncoded drop " +
                      fmt("%.3f", unc_drop) + " (means " + fmt("%.2f %.2f %.2f %.2f", coded1 / kSeeds, coded3 / kSeeds, unc1 / kSeeds, unc3 / kSeeds) + ")"};
}

// ---------------------------------------------------------------- 6

Verdict decentralization()
{
    std::ostringstream why;
    bool pass = true;
    std::map<std::pair<std::size_t, double>, std::vector<std::optional<double>>> g;
    for (std::size_t K : {2u, 4u})
        for (double mu : {0.1, 0.3, 0.55, 0.8})
            for (uint64_t s = 1; s <= kSeeds; ++s) {
                auto c = attack(K, mu);
                c.name = "gini";
                g[{K, mu}].push_back(run(c, s).gini_mean);
            }
    for (auto& [key, vals] : g) {
        if (key.second > mu_crit(key.first)) continue;
        int below = 0;
        for (auto& v : vals) below += v && *v < kGiniReference;
        why << "K" << key.first << " mu " << key.second << ": " << below << "/10 below; ";
        pass = pass && below >= 9;
    }
    int above = 0;
    for (int s = 0; s < kSeeds; ++s) {
        auto hi = g[{2, 0.55}][s], lo = g[{2, 0.1}][s];
        above += hi && lo && *hi > *lo;
    }
    why << "just above threshold higher in " << above << "/10; ";
    pass = pass && above >= 8;

    std::mt19937_64 rng(606);
    int exact = 0;
    for (int t = 0; t < 1000; ++t) {
        std::vector<double> x(1 + rng() % 30);
        for (auto& v : x) v = double(rng() % 500);
        x[rng() % x.size()] += 1;   // not all zero
        double tot = 0, s = 0;
        for (double a : x) {
            tot += a;
            for (double b : x) s += std::fabs(a - b);
        }
        double naive = s / (2 * double(x.size()) * tot);
        auto got = gini(x);
        exact += got && *got == naive;
    }
    why << "oracle exact on " << exact << "/1000";
    pass = pass && exact == 1000;
    return {pass, why.str()};
}

// ---------------------------------------------------------------- 7

Verdict double_spend()
{
    auto cfg = [](std::size_t K) {
        auto c = attack(K, 0.2);
        c.ds_pairs = 10;
        c.ds_regular = 60;
        c.name = "ds-K" + std::to_string(K);
        return c;
    };
    double pd[2] = {0, 0}, pfa[2] = {0, 0};
    int faster = 0;
    for (uint64_t s = 1; s <= kSeeds; ++s) {
        auto r2 = run(cfg(2), s), r4 = run(cfg(4), s);
        pd[0] += r2.double_spend.p_d / kSeeds;
        pd[1] += r4.double_spend.p_d / kSeeds;
        pfa[0] += r2.double_spend.p_fa / kSeeds;
        pfa[1] += r4.double_spend.p_fa / kSeeds;
        auto d2 = r2.double_spend.mean_delay_s, d4 = r4.double_spend.mean_delay_s;
        faster += d2 && d4 && *d4 <= *d2;
    }
    bool pass = pfa[0] <= kMaxFalseAlarm && pfa[1] <= kMaxFalseAlarm && pd[0] >= kMinDetection &&
                pd[1] >= kMinDetection && faster >= 8;
    return {pass, fmt("K=2 P_d %.2f P_fa %.3f; K=4 P_d %.2f P_fa %.3f; ", pd[0], pfa[0], pd[1], pfa[1]) +
                      "K=4 delay not longer in " + std::to_string(faster) + "/10"};
}

// ---------------------------------------------------------------- 8

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Verdict determinism(double& suite_seconds)
{
    const fs::path base = fs::temp_directory_path() / "spid-acceptance";
    fs::remove_all(base);
    const std::set<Emit> all{Emit::metrics, Emit::event_log, Emit::dag_snapshot, Emit::csv_series};
    auto t0 = std::chrono::steady_clock::now();
    int failures = 0;
    std::vector<ScenarioConfig> suite;
    for (const auto& name : preset_names()) {
        if (name == "fig7") continue;   // union of fig7-k2 and fig7-k4
        for (auto& c : preset_scenarios(name, false)) suite.push_back(c);
    }
    auto res = run_configs(suite, {1}, base / "a", 1, all);
    failures += res.exit_code != 0;
    suite_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    for (const auto& c : suite) {
        auto r = run_scenario([&] { auto x = c; x.seed = 1; return x; }());
        g_conservation.push_back({c.name + "/1", r.conservation_ok && r.ledgers_consistent});
    }
    // rerun two presets and compare every artifact byte for byte
    std::vector<ScenarioConfig> again;
    for (const char* name : {"fig3", "fig8"})
        for (auto& c : preset_scenarios(name, false)) again.push_back(c);
    run_configs(again, {1}, base / "b", 1, all);
    std::size_t files = 0, differ = 0;
    for (const auto& c : again)
        for (const auto& e : fs::directory_iterator(base / "b" / c.name / "seed-1")) {
            ++files;
            differ += slurp(e.path()) != slurp(base / "a" / c.name / "seed-1" / e.path().filename());
        }
    bool pass = failures == 0 && differ == 0 && files > 0 && suite_seconds < kLimit8;
    return {pass, std::to_string(files - differ) + "/" + std::to_string(files) + " artifacts identical; suite of " +
                      std::to_string(suite.size()) + " scenarios in " + fmt("%.1f s", suite_seconds)};
}

// ---------------------------------------------------------------- 9

Verdict conservation()
{
    std::size_t bad = 0;
    std::string first;
    for (auto& [name, ok] : g_conservation)
        if (!ok && bad++ == 0) first = name;
    return {bad == 0 && !g_conservation.empty(),
            std::to_string(g_conservation.size() - bad) + "/" + std::to_string(g_conservation.size()) +
                " runs conserve tokens" + (bad ? ", first failure " + first : "")};
}

} // namespace

int main()
{
    int failed = 0;
    auto report = [&](int id, const char* what, double limit, const std::function<Verdict()>& fn) {
        auto t0 = std::chrono::steady_clock::now();
        Verdict v = fn();
        double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        bool ok = v.pass && (limit <= 0 || sec < limit);
        failed += !ok;
        std::printf("criterion %d %-28s %s  %.1fs%s  %s\n", id, what, ok ? "PASS" : "FAIL", sec,
                    limit > 0 && sec >= limit ? " (over time limit)" : "", v.detail.c_str());
        std::fflush(stdout);
    };
    report(1, "coding round trip", kLimit1, coding_round_trip);
    report(2, "coded/uncoded ledger", kLimit2, ledger_equivalence);
    report(3, "aggregated weight oracle", kLimit3, aw_equivalence);
    report(4, "tip pool beyond threshold", kLimit4, tip_pool_growth);
    report(5, "straggler benefit", kLimit5, straggler_benefit);
    report(6, "decentralization", 0, decentralization);
    report(7, "double-spend detection", kLimit7, double_spend);
    double suite = 0;
    report(8, "determinism", 0, [&] { return determinism(suite); });
    report(9, "conservation", 0, conservation);
    std::printf("%d of 9 criteria failed\n", failed);
    return failed ? 1 : 0;
}
