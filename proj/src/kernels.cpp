#include "spid/kernels.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace spid::kernels {

namespace {
constexpr std::size_t kParallelMin = 1 << 16;  // entries
}

bool omp_available()
{
#ifdef _OPENMP
    return true;
#else
    return false;
#endif
}

void hadamard_serial(Matrix& m, std::size_t nblocks)
{
    if (!is_pow2(nblocks)) throw StructuralError("hadamard needs a power-of-two block count");
    if (m.rows % nblocks) throw StructuralError("rows not divisible into blocks");
    const std::size_t span = (m.rows / nblocks) * m.cols;
    Amount* d = m.data.data();
    for (std::size_t h = 1; h < nblocks; h <<= 1)
        for (std::size_t i = 0; i < nblocks; i += 2 * h)
            for (std::size_t j = i; j < i + h; ++j) {
                Amount* x = d + j * span;
                Amount* y = d + (j + h) * span;
                for (std::size_t k = 0; k < span; ++k) {
                    Amount a = x[k], b = y[k];
                    x[k] = a + b;
                    y[k] = a - b;
                }
            }
}

void hadamard_omp(Matrix& m, std::size_t nblocks)
{
    if (!is_pow2(nblocks)) throw StructuralError("hadamard needs a power-of-two block count");
    if (m.rows % nblocks) throw StructuralError("rows not divisible into blocks");
    const std::size_t span = (m.rows / nblocks) * m.cols;
    Amount* d = m.data.data();
    const long half = long(nblocks / 2);
    for (std::size_t h = 1; h < nblocks; h <<= 1) {
        // each butterfly pair is independent within a stage
#pragma omp parallel for schedule(static)
        for (long p = 0; p < half; ++p) {
            std::size_t i = (std::size_t(p) / h) * 2 * h, j = i + std::size_t(p) % h;
            Amount* x = d + j * span;
            Amount* y = d + (j + h) * span;
            for (std::size_t k = 0; k < span; ++k) {
                Amount a = x[k], b = y[k];
                x[k] = a + b;
                y[k] = a - b;
            }
        }
    }
}

void hadamard(Matrix& m, std::size_t nblocks)
{
    if (omp_available() && m.data.size() >= kParallelMin && nblocks >= 4) hadamard_omp(m, nblocks);
    else hadamard_serial(m, nblocks);
}

void axpy_serial(Matrix& dst, const Matrix& src, int sign)
{
    if (!dst.same_shape(src)) throw StructuralError("axpy shape mismatch");
    const std::size_t n = dst.data.size();
    for (std::size_t i = 0; i < n; ++i) dst.data[i] += sign * src.data[i];
}

void axpy_omp(Matrix& dst, const Matrix& src, int sign)
{
    if (!dst.same_shape(src)) throw StructuralError("axpy shape mismatch");
    const long n = long(dst.data.size());
    Amount* d = dst.data.data();
    const Amount* s = src.data.data();
#pragma omp parallel for schedule(static)
    for (long i = 0; i < n; ++i) d[i] += sign * s[i];
}

void axpy(Matrix& dst, const Matrix& src, int sign)
{
    if (omp_available() && dst.data.size() >= kParallelMin) axpy_omp(dst, src, sign);
    else axpy_serial(dst, src, sign);
}

void net_accumulate_serial(const Matrix& w_in, const Matrix& w_out, std::vector<Amount>& w)
{
    const std::size_t M = w.size();
    for (std::size_t r = 0; r < M; ++r)
        for (std::size_t c = 0; c < M; ++c) {
            w[c] += w_in(r, c);
            w[r] -= w_out(r, c);
        }
}

void net_accumulate_omp(const Matrix& w_in, const Matrix& w_out, std::vector<Amount>& w)
{
    const long M = long(w.size());
    // account-major so each thread owns its output slot
#pragma omp parallel for schedule(static)
    for (long a = 0; a < M; ++a) {
        Amount acc = 0;
        for (long r = 0; r < M; ++r) acc += w_in(r, a);
        for (long c = 0; c < M; ++c) acc -= w_out(a, c);
        w[a] += acc;
    }
}

} // namespace spid::kernels
