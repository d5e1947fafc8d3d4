// Cross-chain balance accounting and row-level block validation.
#pragma once

#include "spid/core.hpp"

#include <map>
#include <optional>

namespace spid {

struct TxEntry {
    uint32_t row = 0;   // sending account on source chain
    uint32_t col = 0;   // receiving account on dest chain
    Amount amount = 0;
    friend bool operator==(const TxEntry&, const TxEntry&) = default;
};

// M x M transfer matrix from one chain to another for one epoch.
// Stored sparse: entries sorted by (row, col), merged, strictly positive.
struct TransactionMatrix {
    ChainId source = 0;
    ChainId dest = 0;
    uint64_t epoch = 0;
    std::size_t M = 0;
    std::vector<TxEntry> entries;

    TransactionMatrix() = default;
    TransactionMatrix(ChainId s, ChainId d, uint64_t e, std::size_t m) : source(s), dest(d), epoch(e), M(m) {}

    static TransactionMatrix from_dense(ChainId s, ChainId d, uint64_t e, const Matrix& m);
    Matrix dense() const;

    // adds amount (>=0) to [row,col]; keeps entries canonical
    void add(uint32_t row, uint32_t col, Amount amount);
    Amount at(uint32_t row, uint32_t col) const;
    bool empty() const { return entries.empty(); }
    void zero_row(uint32_t row);
    Amount total() const;

    friend bool operator==(const TransactionMatrix&, const TransactionMatrix&) = default;
};

using Block = std::vector<TransactionMatrix>;

struct FlowAggregates {
    Matrix inflow;             // A_j
    Matrix outflow_confirmed;  // B_j
    Matrix outflow_proposed;   // C_j
    uint64_t epoch = 0;
};

struct CumulativeState {
    Matrix w_in;
    Matrix w_out;
    Matrix last_proposed;
    std::vector<Amount> genesis;
    uint64_t epoch = 0;

    static CumulativeState init(const std::vector<Amount>& genesis);
    std::size_t M() const { return genesis.size(); }
    friend bool operator==(const CumulativeState&, const CumulativeState&) = default;
};

// Sums over l != chain. Throws StructuralError on size mismatch, wrong endpoint
// or a source == dest matrix.
FlowAggregates aggregate_flows(const std::vector<TransactionMatrix>& blocks_in,
                               const std::vector<TransactionMatrix>& blocks_out,
                               const std::vector<TransactionMatrix>& proposed,
                               ChainId chain, std::size_t M, uint64_t epoch);

// w_in += A; w_out += B + (C - last_proposed); last_proposed = C.
CumulativeState update_cumulative(const CumulativeState& state, const FlowAggregates& flows);

std::vector<Amount> net_balances(const CumulativeState& state);

// Per-account total spend across the given matrices.
std::vector<Amount> account_spend(const std::vector<TransactionMatrix>& proposed, std::size_t M);

// Zero every row m with balances[m] < 0. balances must already include the
// proposal's own spend.
std::vector<TransactionMatrix> validate_rows(const std::vector<TransactionMatrix>& proposed,
                                             const std::vector<Amount>& balances);

// state is the chain's view before this proposal is folded in; the previous
// proposal (last_proposed) is released and the new one charged.
std::vector<TransactionMatrix> validate_block(const std::vector<TransactionMatrix>& proposed,
                                              const CumulativeState& state);

// Balance vector after charging `proposed` in place of state.last_proposed.
std::vector<Amount> balances_with_proposal(const std::vector<TransactionMatrix>& proposed,
                                           const CumulativeState& state);

struct TipPayload {
    ChainId source = 0;
    std::vector<TransactionMatrix> payload;
};

// One verdict per tip. A tip is valid iff no nonzero row fails the balance
// check against its source chain's state. Throws PreconditionError when two
// tips share a source chain.
std::vector<bool> validate_tip_payloads(const std::vector<TipPayload>& tips,
                                        const std::map<ChainId, CumulativeState>& states);

} // namespace spid
