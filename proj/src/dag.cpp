#include "spid/dag.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace spid {

ChainWeights ChainWeights::equal(std::size_t N)
{
    if (N == 0 || N > 64) throw StructuralError("chain count must be in [1, 64]");
    ChainWeights w;
    w.num.assign(N, 1);
    w.den = N;
    return w;
}

ChainWeights ChainWeights::from_values(const std::vector<double>& v)
{
    if (v.empty() || v.size() > 64) throw StructuralError("chain count must be in [1, 64]");
    double total = 0;
    for (double x : v) {
        if (!(x > 0)) throw StructuralError("chain weights must be positive");
        total += x;
    }
    constexpr uint64_t D = 1000000000ull;
    ChainWeights w;
    w.den = D;
    uint64_t sum = 0;
    for (double x : v) {
        auto u = uint64_t(std::llround(x / total * double(D)));
        w.num.push_back(std::max<uint64_t>(u, 1));
        sum += w.num.back();
    }
    // absorb rounding in the heaviest chain
    auto it = std::max_element(w.num.begin(), w.num.end());
    *it = *it + D - sum;
    return w;
}

const char* to_string(BlockStatus s)
{
    switch (s) {
    case BlockStatus::tip: return "tip";
    case BlockStatus::unconfirmed: return "unconfirmed";
    case BlockStatus::confirmed: return "confirmed";
    }
    return "?";
}

DagLedger::DagLedger(ChainWeights weights, double eta) : weights_(std::move(weights)), eta_(eta)
{
    if (!(eta > 0 && eta <= 1)) throw StructuralError("eta must lie in (0, 1]");
    eta_micro_ = uint64_t(std::llround(eta * 1e6));
    DagBlock g;
    g.id = kGenesis;
    g.proposer = kNoChain;
    g.status = BlockStatus::confirmed;
    g.confirm_time = 0;
    g.confirm_round = 0;
    g.approver_chains = weights_.size() == 64 ? ~0ull : ((1ull << weights_.size()) - 1);
    blocks_.emplace(kGenesis, std::move(g));
    children_[kGenesis];
    tips_.insert(kGenesis);
    order_.push_back(kGenesis);
}

uint64_t DagLedger::weight_units(uint64_t bits) const
{
    uint64_t u = 0;
    for (std::size_t c = 0; c < weights_.size(); ++c)
        if (bits >> c & 1) u += weights_.num[c];
    return u;
}

bool DagLedger::meets_eta(uint64_t units) const
{
    return (unsigned __int128)units * 1000000u >= (unsigned __int128)eta_micro_ * weights_.den;
}

void DagLedger::attach(DagBlock b)
{
    if (blocks_.count(b.id)) throw AttachError("duplicate block id " + std::to_string(b.id));
    if (b.parents.empty()) throw AttachError("block without parents");
    if (b.proposer >= weights_.size()) throw AttachError("unknown proposer chain");
    std::sort(b.parents.begin(), b.parents.end());
    b.parents.erase(std::unique(b.parents.begin(), b.parents.end()), b.parents.end());
    for (auto p : b.parents)
        if (!blocks_.count(p)) throw AttachError("unknown parent " + std::to_string(p));

    const uint64_t bit = 1ull << b.proposer;
    b.status = BlockStatus::tip;
    b.confirm_time.reset();
    b.confirm_round = -1;
    b.approver_chains = bit;
    BlockId id = b.id;
    for (auto p : b.parents) {
        children_[p].push_back(id);
        auto& pb = blocks_.at(p);
        if (tips_.erase(p) && pb.status == BlockStatus::tip) pb.status = BlockStatus::unconfirmed;
    }
    // ancestors that already carry the bit have all their ancestors carrying it
    std::vector<BlockId> stack(b.parents.begin(), b.parents.end());
    while (!stack.empty()) {
        BlockId x = stack.back();
        stack.pop_back();
        auto& xb = blocks_.at(x);
        if (xb.approver_chains & bit) continue;
        xb.approver_chains |= bit;
        if (xb.status != BlockStatus::confirmed) dirty_.insert(x);
        for (auto p : xb.parents) stack.push_back(p);
    }
    children_[id];
    tips_.insert(id);
    dirty_.insert(id);
    order_.push_back(id);
    blocks_.emplace(id, std::move(b));
}

double DagLedger::aggregated_weight(BlockId id) const
{
    return double(weight_units(block(id).approver_chains)) / double(weights_.den);
}

std::vector<BlockId> DagLedger::update_confirmations(SimTime now, int64_t round)
{
    std::vector<BlockId> out;
    for (auto id : dirty_) {
        auto& b = blocks_.at(id);
        if (b.status == BlockStatus::confirmed) continue;
        if (meets_eta(weight_units(b.approver_chains))) {
            b.status = BlockStatus::confirmed;
            b.confirm_time = now;
            b.confirm_round = round;
            by_round_[round].push_back(id);
            out.push_back(id);
        }
    }
    dirty_.clear();
    return out;
}

const DagBlock& DagLedger::block(BlockId id) const
{
    auto it = blocks_.find(id);
    if (it == blocks_.end()) throw PreconditionError("unknown block " + std::to_string(id));
    return it->second;
}

const std::vector<BlockId>& DagLedger::children(BlockId id) const
{
    auto it = children_.find(id);
    if (it == children_.end()) throw PreconditionError("unknown block " + std::to_string(id));
    return it->second;
}

const std::vector<BlockId>& DagLedger::confirmed_in_round(int64_t round) const
{
    static const std::vector<BlockId> none;
    auto it = by_round_.find(round);
    return it == by_round_.end() ? none : it->second;
}

std::string DagLedger::snapshot() const
{
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(6);
    for (auto id : order_) {
        const auto& b = blocks_.at(id);
        os << b.id << ' ' << (b.proposer == kNoChain ? std::string("-") : std::to_string(b.proposer)) << ' '
           << b.epoch_issued << ' ';
        if (b.parents.empty()) os << '-';
        for (std::size_t i = 0; i < b.parents.size(); ++i) os << (i ? "," : "") << b.parents[i];
        os << ' ' << to_string(b.status) << ' ' << aggregated_weight(id) << '\n';
    }
    return os.str();
}

std::vector<BlockId> select_tips_honest(const DagLedger& ledger, std::size_t K, Rng& rng)
{
    if (K < 1) throw PreconditionError("K must be at least 1");
    const auto& tips = ledger.tips();
    if (tips.empty()) return {DagLedger::kGenesis};
    std::vector<BlockId> pool(tips.begin(), tips.end());
    std::size_t k = std::min(K, pool.size());
    for (std::size_t i = 0; i < k; ++i) {
        auto j = i + rand_below(rng, pool.size() - i);
        std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
    return pool;
}

std::vector<BlockId> select_tips_orphanage(const DagLedger& ledger, std::size_t K, ChainId attacker, Rng&)
{
    if (K < 1) throw PreconditionError("K must be at least 1");
    std::vector<BlockId> own, rest;
    for (auto id : ledger.tips()) (ledger.block(id).proposer == attacker ? own : rest).push_back(id);
    auto older = [&](BlockId a, BlockId b) {
        const auto &x = ledger.block(a), &y = ledger.block(b);
        return x.attach_time != y.attach_time ? x.attach_time < y.attach_time : a < b;
    };
    std::sort(own.begin(), own.end(), older);
    std::sort(rest.begin(), rest.end(), older);
    std::vector<BlockId> out;
    for (auto id : own)
        if (out.size() < K) out.push_back(id);
    for (auto id : rest)
        if (out.size() < K) out.push_back(id);
    if (out.empty()) out.push_back(DagLedger::kGenesis);
    return out;
}

std::map<ChainId, BlockId> assemble_confirmed_superblock(const DagLedger& ledger, int64_t round, Rng& rng,
                                                         const std::set<BlockId>& exclude)
{
    std::map<ChainId, std::vector<BlockId>> per;
    for (auto id : ledger.confirmed_in_round(round)) {
        const auto& b = ledger.block(id);
        if (b.proposer == DagLedger::kNoChain || exclude.count(id)) continue;
        per[b.proposer].push_back(id);
    }
    std::map<ChainId, BlockId> out;
    for (auto& [c, ids] : per) {
        std::sort(ids.begin(), ids.end());
        out[c] = ids[rand_below(rng, ids.size())];
    }
    return out;
}

} // namespace spid
