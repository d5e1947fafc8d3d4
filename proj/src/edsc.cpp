#include "spid/edsc.hpp"

#include <sodium.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>

namespace spid {

namespace {

void sodium_ready()
{
    static const int rc = sodium_init();
    if (rc < 0) throw std::runtime_error("libsodium initialisation failed");
}

} // namespace

uint64_t vrf_output(const Bytes& node_secret, const Bytes& shared_seed, uint64_t epoch)
{
    sodium_ready();
    unsigned char key[crypto_generichash_KEYBYTES];
    crypto_generichash(key, sizeof key, node_secret.data(), node_secret.size(), nullptr, 0);
    Bytes msg = shared_seed;
    for (int i = 0; i < 8; ++i) msg.push_back(uint8_t(epoch >> (8 * i)));
    unsigned char out[crypto_generichash_BYTES_MIN];
    crypto_generichash(out, sizeof out, msg.data(), msg.size(), key, sizeof key);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= uint64_t(out[i]) << (8 * i);
    return v;
}

Bytes epoch_seed(uint64_t scenario_seed, ChainId chain, uint64_t epoch)
{
    uint64_t s = derive_seed(scenario_seed, 0x5eed, chain, epoch);
    Bytes b(8);
    for (int i = 0; i < 8; ++i) b[i] = uint8_t(s >> (8 * i));
    return b;
}

std::size_t committee_size(std::size_t n)
{
    return std::max<std::size_t>(1, std::size_t(std::llround(double(n) / 10.0)));
}

CommitteeSelection select_committee(const std::vector<NodeStake>& nodes, const Bytes& shared_seed,
                                    uint64_t epoch, std::size_t size)
{
    if (size > nodes.size()) throw PreconditionError("committee larger than node set");
    CommitteeSelection c;
    c.epoch = epoch;
    std::vector<std::pair<long double, NodeId>> score;
    for (const auto& n : nodes) {
        uint64_t v = vrf_output(n.secret, shared_seed, epoch);
        c.vrf_outputs[n.node] = v;
        long double u = (long double)v / 18446744073709551616.0L;
        score.push_back({(long double)n.stake * u, n.node});
    }
    std::stable_sort(score.begin(), score.end(), [](auto& a, auto& b) {
        return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    for (std::size_t i = 0; i < size; ++i) c.members.push_back(score[i].second);
    return c;
}

const char* to_string(EventKind k)
{
    static const char* names[] = {"X1", "X2", "X3", "X4", "X5", "X6", "X7"};
    return names[int(k) - 1];
}

const char* to_string(Contract c)
{
    static const char* names[] = {"C1", "C2", "C3", "C4", "C5", "C6"};
    return names[int(c) - 1];
}

const char* to_string(Outcome o)
{
    switch (o) {
    case Outcome::pending: return "pending";
    case Outcome::active: return "active";
    case Outcome::discarded: return "discarded";
    }
    return "?";
}

Contract contract_for(EventKind k)
{
    switch (k) {
    case EventKind::X1: return Contract::C1;
    case EventKind::X2: return Contract::C2;
    case EventKind::X3: return Contract::C3;
    case EventKind::X4: return Contract::C4;
    case EventKind::X5:
    case EventKind::X6: return Contract::C5;
    case EventKind::X7: return Contract::C6;
    }
    throw DispatchError("unknown event kind");
}

std::size_t EventRecord::approvals() const
{
    return std::size_t(std::count_if(votes.begin(), votes.end(), [](auto& v) { return v.second; }));
}

EventRecord propose_and_vote(EventKind kind, ChainId chain, uint64_t epoch, const CommitteeSelection& committee,
                             const PayloadFn& payload, const VerdictFn& verdict)
{
    if (committee.members.empty()) throw PreconditionError("empty committee");
    EventRecord rec;
    rec.kind = kind;
    rec.chain = chain;
    rec.epoch = epoch;
    for (NodeId proposer : committee.members) {
        rec.proposer_node = proposer;
        rec.payload = payload(proposer);
        rec.votes.clear();
        ++rec.attempts;
        for (NodeId voter : committee.members) rec.votes[voter] = verdict(voter, proposer, rec.payload);
        if (2 * rec.approvals() > committee.members.size()) {
            rec.outcome = Outcome::active;
            return rec;
        }
    }
    rec.outcome = Outcome::discarded;
    return rec;
}

void EventPools::publish(const EventRecord& e)
{
    if (e.outcome != Outcome::active) return;
    for (const auto& t : temp)
        if (t.kind == e.kind && t.epoch == e.epoch && t.chain == e.chain)
            throw SequencingError(std::string("second active ") + to_string(e.kind) + " in epoch " +
                                  std::to_string(e.epoch));
    temp.push_back(e);
}

std::vector<EventRecord> drain_pool(EventPools& pools, uint64_t epoch)
{
    if (pools.side_ledger.count(epoch)) throw SequencingError("pool already drained for epoch " + std::to_string(epoch));
    auto& blk = pools.side_ledger[epoch];
    blk = std::move(pools.temp);
    pools.temp.clear();
    return blk;
}

std::string event_log_line(const EventRecord& e)
{
    nlohmann::json j;
    j["chain"] = e.chain;
    j["epoch"] = e.epoch;
    j["kind"] = to_string(e.kind);
    j["proposer"] = e.proposer_node;
    j["approve"] = e.approvals();
    j["reject"] = e.votes.size() - e.approvals();
    j["attempts"] = e.attempts;
    j["outcome"] = to_string(e.outcome);
    return j.dump();
}

std::vector<RowPartition> partition_rows(std::size_t M, uint32_t n)
{
    std::vector<RowPartition> out(n);
    std::size_t base = M / n, extra = M % n, r = 0;
    for (uint32_t k = 0; k < n; ++k) {
        out[k] = {r, base + (k < extra ? 1 : 0)};
        r += out[k].count;
    }
    return out;
}

std::vector<WorkerTask> assign_tasks(const Matrix& A, const Matrix& B, const Matrix& dC, const GroupPlan& plan,
                                     bool coded)
{
    std::vector<WorkerTask> tasks;
    if (coded) {
        for (auto& s : encode_epoch(A, B, dC, plan))
            tasks.push_back({s.worker_index, s.group, s.position, std::move(s.a), std::move(s.b), std::move(s.dc)});
        return tasks;
    }
    auto parts = partition_rows(plan.M, plan.n);
    for (uint32_t k = 0; k < plan.n; ++k)
        tasks.push_back({k, 0, k, A.slice_rows(parts[k].first, parts[k].count),
                         B.slice_rows(parts[k].first, parts[k].count), dC.slice_rows(parts[k].first, parts[k].count)});
    return tasks;
}

std::optional<DecodedState> collect_results(const std::vector<WorkerResult>& results, const GroupPlan& plan,
                                            bool coded)
{
    if (coded) {
        std::vector<std::map<uint32_t, Matrix>> win(plan.groups.size()), wout(plan.groups.size());
        for (const auto& r : results) {
            win.at(r.group)[r.position] = r.w_in;
            wout.at(r.group)[r.position] = r.w_out;
        }
        for (std::size_t g = 0; g < plan.groups.size(); ++g) {
            std::vector<uint32_t> pos;
            for (auto& [p, _] : win[g]) pos.push_back(p);
            if (!decodable(pos, plan.groups[g])) return std::nullopt;
        }
        return DecodedState{decode_all(win, plan), decode_all(wout, plan)};
    }
    std::map<uint32_t, const WorkerResult*> by;
    for (const auto& r : results) by[r.position] = &r;
    if (by.size() < plan.n) return std::nullopt;
    DecodedState d;
    for (auto& [p, r] : by) {
        d.w_in = vstack(d.w_in, r->w_in);
        d.w_out = vstack(d.w_out, r->w_out);
    }
    return d;
}

namespace {

std::vector<Amount> balances_from(const DecodedState& s, const std::vector<Amount>& genesis)
{
    CumulativeState cs;
    cs.w_in = s.w_in;
    cs.w_out = s.w_out;
    cs.genesis = genesis;
    return net_balances(cs);
}

} // namespace

std::optional<C2Output> contract_c2(const std::vector<WorkerResult>& results, const GroupPlan& plan, bool coded,
                                    const std::vector<Amount>& genesis, const Block& proposed)
{
    auto st = collect_results(results, plan, coded);
    if (!st) return std::nullopt;
    C2Output out;
    out.balances = balances_from(*st, genesis);
    out.proposed_block = validate_rows(proposed, out.balances);
    return out;
}

std::optional<std::vector<bool>> contract_c4(const std::vector<std::vector<WorkerResult>>& per_tip,
                                             const GroupPlan& plan, bool coded,
                                             const std::vector<TipPayload>& tips,
                                             const std::map<ChainId, std::vector<Amount>>& genesis)
{
    if (per_tip.size() != tips.size()) throw StructuralError("result count differs from tip count");
    std::vector<bool> verdict;
    for (std::size_t i = 0; i < tips.size(); ++i) {
        auto st = collect_results(per_tip[i], plan, coded);
        if (!st) return std::nullopt;
        auto w = balances_from(*st, genesis.at(tips[i].source));
        bool ok = true;
        for (const auto& m : tips[i].payload)
            for (const auto& e : m.entries)
                if (w[e.row] < 0) ok = false;
        verdict.push_back(ok);
    }
    return verdict;
}

void contract_c5_submit(DagLedger& dag, DagBlock block, const std::vector<BlockId>& valid_parents)
{
    block.parents = valid_parents;
    if (block.parents.empty()) block.parents.push_back(DagLedger::kGenesis);
    dag.attach(std::move(block));
}

std::vector<BlockId> contract_c5_update(DagLedger& dag, SimTime now, int64_t round)
{
    return dag.update_confirmations(now, round);
}

std::map<ChainId, BlockId> contract_c6(const DagLedger& dag, int64_t round, Rng& rng,
                                       std::vector<std::map<ChainId, BlockId>>& chain_ledger)
{
    auto sb = assemble_confirmed_superblock(dag, round, rng);
    chain_ledger.push_back(sb);
    return sb;
}

void dispatch_contract(Contract c, const EventRecord& e, const ContractTable& table)
{
    if (e.outcome != Outcome::active) throw DispatchError("event is not active");
    if (contract_for(e.kind) != c)
        throw DispatchError(std::string(to_string(e.kind)) + " does not trigger " + to_string(c));
    const auto& h = table.handlers[std::size_t(c) - 1];
    if (!h) throw DispatchError(std::string("no handler bound for ") + to_string(c));
    h(e);
}

} // namespace spid
