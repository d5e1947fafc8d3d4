// Independent reference computations for the tests. Deliberately naive.
#pragma once

#include "spid/core.hpp"

#include <gmpxx.h>

#include <random>
#include <vector>

namespace oracle {

inline int h_entry(uint32_t i, uint32_t j)
{
    // Sylvester recursion written out element-wise
    int s = 1;
    while (i || j) {
        if ((i & 1) && (j & 1)) s = -s;
        i >>= 1;
        j >>= 1;
    }
    return s;
}

// Dense explicit product: out block i = sum_k H[i,k] block_k.
inline spid::Matrix hadamard_dense(const spid::Matrix& in, std::size_t nb)
{
    std::size_t br = in.rows / nb;
    spid::Matrix out(in.rows, in.cols);
    for (std::size_t i = 0; i < nb; ++i)
        for (std::size_t k = 0; k < nb; ++k)
            for (std::size_t r = 0; r < br; ++r)
                for (std::size_t c = 0; c < in.cols; ++c)
                    out(i * br + r, c) += h_entry(uint32_t(i), uint32_t(k)) * in(k * br + r, c);
    return out;
}

// Rank over Q of H[rows, cols] by exact rational elimination.
inline std::size_t h_rank(const std::vector<uint32_t>& rows, const std::vector<uint32_t>& cols)
{
    std::vector<std::vector<mpq_class>> a(rows.size(), std::vector<mpq_class>(cols.size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < cols.size(); ++c) a[r][c] = h_entry(rows[r], cols[c]);
    std::size_t rank = 0;
    for (std::size_t c = 0; c < cols.size() && rank < rows.size(); ++c) {
        std::size_t p = rank;
        while (p < rows.size() && a[p][c] == 0) ++p;
        if (p == rows.size()) continue;
        std::swap(a[p], a[rank]);
        for (std::size_t r = rank + 1; r < rows.size(); ++r) {
            if (a[r][c] == 0) continue;
            mpq_class f = a[r][c] / a[rank][c];
            for (std::size_t k = c; k < cols.size(); ++k) a[r][k] -= f * a[rank][k];
        }
        ++rank;
    }
    return rank;
}

// Solve H[recv, data] x = y exactly for block data; returns empty on singular.
inline bool h_solve(const std::vector<uint32_t>& recv, const std::vector<uint32_t>& data_cols,
                    const std::vector<spid::Matrix>& y, std::vector<spid::Matrix>& x)
{
    std::size_t R = recv.size(), D = data_cols.size();
    if (h_rank(recv, data_cols) < D) return false;
    std::size_t br = y.empty() ? 0 : y[0].rows, cols = y.empty() ? 0 : y[0].cols;
    x.assign(D, spid::Matrix(br, cols));
    for (std::size_t r0 = 0; r0 < br; ++r0)
        for (std::size_t c0 = 0; c0 < cols; ++c0) {
            std::vector<std::vector<mpq_class>> a(R, std::vector<mpq_class>(D + 1));
            for (std::size_t r = 0; r < R; ++r) {
                for (std::size_t c = 0; c < D; ++c) a[r][c] = h_entry(recv[r], data_cols[c]);
                a[r][D] = mpq_class(std::to_string((long long)y[r](r0, c0)));
            }
            std::size_t rank = 0;
            std::vector<std::size_t> piv;
            for (std::size_t c = 0; c < D; ++c) {
                std::size_t p = rank;
                while (p < R && a[p][c] == 0) ++p;
                if (p == R) continue;
                std::swap(a[p], a[rank]);
                for (std::size_t r = 0; r < R; ++r) {
                    if (r == rank || a[r][c] == 0) continue;
                    mpq_class f = a[r][c] / a[rank][c];
                    for (std::size_t k = c; k <= D; ++k) a[r][k] -= f * a[rank][k];
                }
                piv.push_back(c);
                ++rank;
            }
            for (std::size_t k = 0; k < rank; ++k) {
                mpq_class v = a[k][D] / a[k][piv[k]];
                x[piv[k]](r0, c0) = (spid::Amount)v.get_num().get_si();
            }
        }
    return true;
}

inline spid::Matrix random_matrix(std::mt19937_64& rng, std::size_t r, std::size_t c, int64_t lo, int64_t hi)
{
    spid::Matrix m(r, c);
    std::uniform_int_distribution<int64_t> d(lo, hi);
    for (auto& v : m.data) v = d(rng);
    return m;
}

} // namespace oracle
