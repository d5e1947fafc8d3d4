// Serial against OpenMP for the three hot loops.
#include <benchmark/benchmark.h>

#include "spid/kernels.hpp"

using namespace spid;

namespace {

Matrix filled(std::size_t r, std::size_t c, uint64_t seed)
{
    Rng rng(seed);
    Matrix m(r, c);
    for (auto& v : m.data) v = Amount(rand_below(rng, 1000));
    return m;
}

template <void (*F)(Matrix&, std::size_t)>
void BM_hadamard(benchmark::State& st)
{
    const std::size_t nb = std::size_t(st.range(0));
    auto m = filled(nb * 8, 256, 1);
    for (auto _ : st) {
        F(m, nb);
        benchmark::DoNotOptimize(m.data.data());
    }
}

template <void (*F)(Matrix&, const Matrix&, int)>
void BM_axpy(benchmark::State& st)
{
    const std::size_t M = std::size_t(st.range(0));
    auto d = filled(M, M, 2), s = filled(M, M, 3);
    for (auto _ : st) {
        F(d, s, 1);
        benchmark::DoNotOptimize(d.data.data());
    }
}

template <void (*F)(const Matrix&, const Matrix&, std::vector<Amount>&)>
void BM_net(benchmark::State& st)
{
    const std::size_t M = std::size_t(st.range(0));
    auto a = filled(M, M, 4), b = filled(M, M, 5);
    std::vector<Amount> w(M);
    for (auto _ : st) {
        F(a, b, w);
        benchmark::DoNotOptimize(w.data());
    }
}

} // namespace

BENCHMARK(BM_hadamard<kernels::hadamard_serial>)->Arg(16)->Arg(64);
BENCHMARK(BM_hadamard<kernels::hadamard_omp>)->Arg(16)->Arg(64);
BENCHMARK(BM_axpy<kernels::axpy_serial>)->Arg(100)->Arg(1000);
BENCHMARK(BM_axpy<kernels::axpy_omp>)->Arg(100)->Arg(1000);
BENCHMARK(BM_net<kernels::net_accumulate_serial>)->Arg(100)->Arg(1000);
BENCHMARK(BM_net<kernels::net_accumulate_omp>)->Arg(100)->Arg(1000);

BENCHMARK_MAIN();
