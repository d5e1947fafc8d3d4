#include "spid/ledger.hpp"

#include <algorithm>
#include <set>

namespace spid {

TransactionMatrix TransactionMatrix::from_dense(ChainId s, ChainId d, uint64_t e, const Matrix& m)
{
    if (m.rows != m.cols) throw StructuralError("transaction matrix must be square");
    TransactionMatrix t(s, d, e, m.rows);
    for (std::size_t r = 0; r < m.rows; ++r)
        for (std::size_t c = 0; c < m.cols; ++c) {
            Amount v = m(r, c);
            if (v < 0) throw StructuralError("negative transfer amount");
            if (v) t.entries.push_back({uint32_t(r), uint32_t(c), v});
        }
    return t;
}

Matrix TransactionMatrix::dense() const
{
    Matrix m(M, M);
    for (const auto& e : entries) m(e.row, e.col) = e.amount;
    return m;
}

void TransactionMatrix::add(uint32_t row, uint32_t col, Amount amount)
{
    if (row >= M || col >= M) throw StructuralError("entry outside M x M");
    if (amount < 0) throw StructuralError("negative transfer amount");
    if (amount == 0) return;
    auto it = std::lower_bound(entries.begin(), entries.end(), std::pair{row, col},
        [](const TxEntry& e, const std::pair<uint32_t, uint32_t>& k) {
            return std::pair{e.row, e.col} < k;
        });
    if (it != entries.end() && it->row == row && it->col == col) it->amount += amount;
    else entries.insert(it, {row, col, amount});
}

Amount TransactionMatrix::at(uint32_t row, uint32_t col) const
{
    for (const auto& e : entries)
        if (e.row == row && e.col == col) return e.amount;
    return 0;
}

void TransactionMatrix::zero_row(uint32_t row)
{
    std::erase_if(entries, [row](const TxEntry& e) { return e.row == row; });
}

Amount TransactionMatrix::total() const
{
    Amount s = 0;
    for (const auto& e : entries) s += e.amount;
    return s;
}

CumulativeState CumulativeState::init(const std::vector<Amount>& genesis)
{
    CumulativeState s;
    std::size_t M = genesis.size();
    s.w_in = Matrix(M, M);
    s.w_out = Matrix(M, M);
    s.last_proposed = Matrix(M, M);
    s.genesis = genesis;
    return s;
}

namespace {

void accumulate(Matrix& dst, const TransactionMatrix& t, std::size_t M)
{
    if (t.M != M) throw StructuralError("transaction matrix dimension mismatch");
    if (t.source == t.dest) throw StructuralError("intra-chain transfer matrix rejected");
    for (const auto& e : t.entries) dst(e.row, e.col) += e.amount;
}

} // namespace

FlowAggregates aggregate_flows(const std::vector<TransactionMatrix>& blocks_in,
                               const std::vector<TransactionMatrix>& blocks_out,
                               const std::vector<TransactionMatrix>& proposed,
                               ChainId chain, std::size_t M, uint64_t epoch)
{
    FlowAggregates f{Matrix(M, M), Matrix(M, M), Matrix(M, M), epoch};
    for (const auto& t : blocks_in) {
        if (t.dest != chain) throw StructuralError("inflow matrix not addressed to chain");
        accumulate(f.inflow, t, M);
    }
    for (const auto& t : blocks_out) {
        if (t.source != chain) throw StructuralError("outflow matrix not from chain");
        accumulate(f.outflow_confirmed, t, M);
    }
    for (const auto& t : proposed) {
        if (t.source != chain) throw StructuralError("proposed matrix not from chain");
        accumulate(f.outflow_proposed, t, M);
    }
    return f;
}

CumulativeState update_cumulative(const CumulativeState& state, const FlowAggregates& flows)
{
    if (flows.epoch != state.epoch + 1)
        throw SequencingError("flow epoch " + std::to_string(flows.epoch) + " does not follow state epoch " +
                              std::to_string(state.epoch));
    if (!flows.inflow.same_shape(state.w_in) || !flows.outflow_confirmed.same_shape(state.w_out) ||
        !flows.outflow_proposed.same_shape(state.last_proposed))
        throw StructuralError("flow dimension mismatch");
    CumulativeState s = state;
    s.w_in += flows.inflow;
    s.w_out += flows.outflow_confirmed;
    s.w_out += flows.outflow_proposed;
    s.w_out -= state.last_proposed;
    s.last_proposed = flows.outflow_proposed;
    s.epoch = flows.epoch;
    return s;
}

std::vector<Amount> net_balances(const CumulativeState& state)
{
    std::size_t M = state.M();
    std::vector<Amount> w(state.genesis);
    for (std::size_t r = 0; r < M; ++r) {
        const Amount* in = state.w_in.row(r);
        const Amount* out = state.w_out.row(r);
        for (std::size_t c = 0; c < M; ++c) {
            w[c] += in[c];
            w[r] -= out[c];
        }
    }
    return w;
}

std::vector<Amount> account_spend(const std::vector<TransactionMatrix>& proposed, std::size_t M)
{
    std::vector<Amount> s(M, 0);
    for (const auto& t : proposed) {
        if (t.M != M) throw StructuralError("transaction matrix dimension mismatch");
        for (const auto& e : t.entries) s[e.row] += e.amount;
    }
    return s;
}

std::vector<TransactionMatrix> validate_rows(const std::vector<TransactionMatrix>& proposed,
                                             const std::vector<Amount>& balances)
{
    std::vector<TransactionMatrix> out = proposed;
    for (auto& t : out)
        std::erase_if(t.entries, [&](const TxEntry& e) { return balances.at(e.row) < 0; });
    return out;
}

std::vector<Amount> balances_with_proposal(const std::vector<TransactionMatrix>& proposed,
                                           const CumulativeState& state)
{
    std::size_t M = state.M();
    for (const auto& t : proposed)
        if (t.source == t.dest) throw StructuralError("intra-chain transfer matrix rejected");
    std::vector<Amount> w = net_balances(state);
    std::vector<Amount> spend = account_spend(proposed, M);
    for (std::size_t r = 0; r < M; ++r) {
        const Amount* lp = state.last_proposed.row(r);
        for (std::size_t c = 0; c < M; ++c) w[r] += lp[c];
        w[r] -= spend[r];
    }
    return w;
}

std::vector<TransactionMatrix> validate_block(const std::vector<TransactionMatrix>& proposed,
                                              const CumulativeState& state)
{
    return validate_rows(proposed, balances_with_proposal(proposed, state));
}

std::vector<bool> validate_tip_payloads(const std::vector<TipPayload>& tips,
                                        const std::map<ChainId, CumulativeState>& states)
{
    std::set<ChainId> seen;
    for (const auto& t : tips)
        if (!seen.insert(t.source).second)
            throw PreconditionError("two tips from chain " + std::to_string(t.source));
    std::vector<bool> verdict;
    verdict.reserve(tips.size());
    for (const auto& t : tips) {
        auto it = states.find(t.source);
        if (it == states.end()) throw PreconditionError("no state for chain " + std::to_string(t.source));
        auto w = balances_with_proposal(t.payload, it->second);
        bool ok = true;
        for (const auto& m : t.payload)
            for (const auto& e : m.entries)
                if (w[e.row] < 0) ok = false;
        verdict.push_back(ok);
    }
    return verdict;
}

} // namespace spid
