// Hot loops in two flavours: a plain serial reference and an OpenMP version.
// The dispatching entry points pick OpenMP above a size threshold.
#pragma once

#include "spid/core.hpp"

namespace spid::kernels {

// In-place unnormalised Sylvester transform over `nblocks` row blocks of a
// matrix laid out block-major (nblocks * block_rows rows).
void hadamard_serial(Matrix& m, std::size_t nblocks);
void hadamard_omp(Matrix& m, std::size_t nblocks);
void hadamard(Matrix& m, std::size_t nblocks);

// dst += sign * src
void axpy_serial(Matrix& dst, const Matrix& src, int sign);
void axpy_omp(Matrix& dst, const Matrix& src, int sign);
void axpy(Matrix& dst, const Matrix& src, int sign = 1);

// Column sums and row sums used by balance computation.
void net_accumulate_serial(const Matrix& w_in, const Matrix& w_out, std::vector<Amount>& w);
void net_accumulate_omp(const Matrix& w_in, const Matrix& w_out, std::vector<Amount>& w);

bool omp_available();

} // namespace spid::kernels
