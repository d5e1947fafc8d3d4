#include "doctest.h"
#include "spid/dag.hpp"

#include <cmath>
#include <map>
#include <set>

using namespace spid;

namespace {

DagBlock mk(BlockId id, ChainId c, std::vector<BlockId> parents, SimTime t = 0, uint64_t epoch = 0)
{
    DagBlock b;
    b.id = id;
    b.proposer = c;
    b.parents = std::move(parents);
    b.attach_time = t;
    b.epoch_issued = epoch;
    return b;
}

// Reverse reachability by repeated scanning; independent of the cached bitsets.
double brute_aw(const DagLedger& L, BlockId target)
{
    const auto& tb = L.block(target);
    if (tb.proposer == DagLedger::kNoChain) return 1.0;
    std::set<BlockId> approvers;
    bool grew = true;
    while (grew) {
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

} // namespace

TEST_CASE("chain weights normalise")
{
    auto w = ChainWeights::equal(4);
    CHECK(w.value(2) == doctest::Approx(0.25));
    auto v = ChainWeights::from_values({1, 2, 3});
    uint64_t s = 0;
    for (auto x : v.num) s += x;
    CHECK(s == v.den);
    CHECK(v.value(2) == doctest::Approx(0.5));
    CHECK_THROWS_AS(ChainWeights::from_values({1, 0}), StructuralError);
}

TEST_CASE("attach: genesis stays confirmed, new block is the only tip")
{
    DagLedger L(ChainWeights::equal(3), 0.67);
    L.attach(mk(1, 0, {0}));
    CHECK(L.block(0).status == BlockStatus::confirmed);
    CHECK(L.tips() == std::set<BlockId>{1});
    CHECK(L.aggregated_weight(1) == doctest::Approx(1.0 / 3));
}

TEST_CASE("attach: errors leave the ledger unchanged")
{
    DagLedger L(ChainWeights::equal(3), 0.67);
    L.attach(mk(1, 0, {0}));
    auto before = L.snapshot();
    CHECK_THROWS_AS(L.attach(mk(2, 1, {1, 99})), AttachError);
    CHECK_THROWS_AS(L.attach(mk(1, 1, {0})), AttachError);
    CHECK(L.snapshot() == before);
    CHECK(L.tips() == std::set<BlockId>{1});
}

TEST_CASE("two-epoch reference construction: weights and statuses")
{
    // six chains with distinct weights
    std::vector<double> w{0.10, 0.15, 0.20, 0.10, 0.25, 0.20};
    DagLedger L(ChainWeights::from_values(w), 0.67);
    L.attach(mk(1, 0, {0}, 1));
    L.attach(mk(2, 1, {1}, 2));
    L.attach(mk(3, 2, {1}, 2));
    L.attach(mk(4, 3, {1}, 2));
    CHECK(L.update_confirmations(3, 1).empty());
    CHECK(L.aggregated_weight(2) == doctest::Approx(w[1]));
    CHECK(L.aggregated_weight(1) == doctest::Approx(w[0] + w[1] + w[2] + w[3]));
    CHECK(L.tips() == std::set<BlockId>{2, 3, 4});
    CHECK(L.block(1).status == BlockStatus::unconfirmed);

    L.attach(mk(5, 4, {2, 3}, 4));
    L.attach(mk(6, 5, {4}, 4));
    auto newly = L.update_confirmations(5, 2);
    CHECK(newly == std::vector<BlockId>{1});
    CHECK(L.aggregated_weight(1) == doctest::Approx(1.0));
    CHECK(L.block(1).status == BlockStatus::confirmed);
    CHECK(L.aggregated_weight(2) == doctest::Approx(w[1] + w[4]));
    CHECK(L.aggregated_weight(3) == doctest::Approx(w[2] + w[4]));
    CHECK(L.aggregated_weight(4) == doctest::Approx(w[3] + w[5]));
    CHECK(L.tips() == std::set<BlockId>{5, 6});
    for (BlockId b : {2, 3, 4}) CHECK(L.block(b).status == BlockStatus::unconfirmed);
    CHECK(L.block(5).status == BlockStatus::tip);
    CHECK(L.update_confirmations(6, 3).empty());
}

TEST_CASE("aggregated weight: three-chain path in a four-chain network")
{
    DagLedger L(ChainWeights::equal(4), 0.67);
    L.attach(mk(1, 0, {0}));
    L.attach(mk(2, 1, {1}));
    L.attach(mk(3, 2, {2}));
    CHECK(L.aggregated_weight(1) == doctest::Approx(0.75));
    CHECK(brute_aw(L, 1) == doctest::Approx(0.75));
    // a second block from an already-counted chain adds nothing
    L.attach(mk(4, 2, {3}));
    CHECK(L.aggregated_weight(1) == doctest::Approx(0.75));
}

TEST_CASE("confirmation: inclusive threshold, absorbing")
{
    DagLedger L(ChainWeights::equal(3), 0.67);
    L.attach(mk(1, 0, {0}));
    L.attach(mk(2, 1, {1}));
    CHECK(L.update_confirmations(1, 1).empty());
    L.attach(mk(3, 2, {2}));
    CHECK(L.update_confirmations(2, 2) == std::vector<BlockId>{1});
    CHECK(L.block(1).confirm_time == 2);
    DagLedger E(ChainWeights::equal(4), 0.75);
    E.attach(mk(1, 0, {0}));
    E.attach(mk(2, 1, {1}));
    E.attach(mk(3, 2, {2}));
    CHECK(E.update_confirmations(1, 1) == std::vector<BlockId>{1});
}

TEST_CASE("random DAGs: cached weight equals brute force, invariants hold")
{
    Rng rng(42);
    for (int trial = 0; trial < 30; ++trial) {
        std::size_t N = 2 + rand_below(rng, 9);
        DagLedger L(ChainWeights::equal(N), 0.67);
        std::map<BlockId, double> last;
        std::size_t nb = 20 + rand_below(rng, 120);
        for (BlockId id = 1; id <= nb; ++id) {
            std::vector<BlockId> ps;
            std::size_t k = 1 + rand_below(rng, 3);
            for (std::size_t j = 0; j < k; ++j) ps.push_back(rand_below(rng, id));
            L.attach(mk(id, ChainId(rand_below(rng, N)), ps, SimTime(id)));
            L.update_confirmations(SimTime(id), int64_t(id));
            for (auto& [b, aw] : last) CHECK(L.aggregated_weight(b) >= aw - 1e-12);
            for (BlockId b = 1; b <= id; ++b) last[b] = L.aggregated_weight(b);
        }
        std::set<BlockId> zero;
        for (auto id : L.order())
            if (L.children(id).empty()) zero.insert(id);
        CHECK(L.tips() == zero);
        for (auto id : L.order()) {
            double aw = L.aggregated_weight(id);
            CHECK(aw == doctest::Approx(brute_aw(L, id)));
            CHECK(aw > 0);
            CHECK(aw <= 1.0 + 1e-12);
            if (L.block(id).status == BlockStatus::confirmed) CHECK(aw >= 0.67 - 1e-12);
        }
    }
}

TEST_CASE("honest tip selection")
{
    Rng rng(7);
    DagLedger L(ChainWeights::equal(3), 0.67);
    CHECK(select_tips_honest(L, 2, rng) == std::vector<BlockId>{0});
    L.attach(mk(1, 0, {0}));
    CHECK(select_tips_honest(L, 2, rng) == std::vector<BlockId>{1});

    DagLedger M(ChainWeights::equal(10), 0.67);
    for (BlockId id = 1; id <= 10; ++id) M.attach(mk(id, ChainId(id - 1), {0}));
    Rng a(99), b(99);
    CHECK(select_tips_honest(M, 2, a) == select_tips_honest(M, 2, b));
    std::map<std::pair<BlockId, BlockId>, int> freq;
    const int trials = 10000;
    for (int t = 0; t < trials; ++t) {
        auto s = select_tips_honest(M, 2, rng);
        REQUIRE(s.size() == 2);
        freq[{std::min(s[0], s[1]), std::max(s[0], s[1])}]++;
    }
    CHECK(freq.size() == 45);
    double p = 1.0 / 45, sigma = std::sqrt(trials * p * (1 - p));
    double chi = 0;
    for (auto& [k, v] : freq) {
        CHECK(std::abs(v - trials * p) <= 4 * sigma);
        chi += (v - trials * p) * (v - trials * p) / (trials * p);
    }
    CHECK(chi < 80.0);   // 44 degrees of freedom, far tail
}

TEST_CASE("orphanage tip selection")
{
    Rng rng(1);
    DagLedger L(ChainWeights::equal(3), 0.67);
    L.attach(mk(1, 1, {0}, 10));
    L.attach(mk(2, 0, {0}, 5));
    L.attach(mk(3, 2, {0}, 1));
    L.attach(mk(4, 0, {0}, 7));
    CHECK(select_tips_orphanage(L, 2, 0, rng) == std::vector<BlockId>{2, 4});
    CHECK(select_tips_orphanage(L, 3, 0, rng) == std::vector<BlockId>{2, 4, 3});
    CHECK(select_tips_orphanage(L, 2, 2, rng) == std::vector<BlockId>{3, 2});
    DagLedger T(ChainWeights::equal(3), 0.67);
    T.attach(mk(9, 1, {0}, 3));
    T.attach(mk(8, 1, {0}, 3));
    CHECK(select_tips_orphanage(T, 1, 0, rng) == std::vector<BlockId>{8});
}

TEST_CASE("confirmed super-block assembly")
{
    Rng rng(3);
    DagLedger L(ChainWeights::equal(2), 0.5);
    CHECK(assemble_confirmed_superblock(L, 1, rng).empty());
    L.attach(mk(1, 0, {0}));
    L.update_confirmations(1, 1);
    auto sb = assemble_confirmed_superblock(L, 1, rng);
    CHECK(sb.size() == 1);
    CHECK(sb.at(0) == 1);

    DagLedger M(ChainWeights::equal(2), 0.5);
    M.attach(mk(1, 0, {0}));
    M.attach(mk(2, 0, {1}));
    M.attach(mk(3, 0, {2}));
    M.update_confirmations(1, 4);
    std::map<BlockId, int> freq;
    const int trials = 10000;
    for (int t = 0; t < trials; ++t) freq[assemble_confirmed_superblock(M, 4, rng).at(0)]++;
    double p = 1.0 / 3, sigma = std::sqrt(trials * p * (1 - p));
    for (BlockId b : {1, 2, 3}) CHECK(std::abs(freq[b] - trials * p) <= 3 * sigma);
}

TEST_CASE("snapshot lists every block")
{
    DagLedger L(ChainWeights::equal(2), 0.67);
    L.attach(mk(1, 1, {0}, 0, 3));
    auto s = L.snapshot();
    CHECK(s == "0 - 0 - confirmed 1.000000\n1 1 3 0 tip 0.500000\n");
}
