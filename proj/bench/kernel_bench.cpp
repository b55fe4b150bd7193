#include <benchmark/benchmark.h>

#include "mhc/kernels.hpp"
#include "mhc/random_matrix.hpp"

using namespace mhc;

namespace {

void BM_MatmulReference(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const Matrix a = sample_gaussian(n, n, 1), b = sample_gaussian(n, n, 2);
    Matrix c(n, n);
    for (auto _ : state) {
        kernels::reference::matmul(a, b, c);
        benchmark::DoNotOptimize(c.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}

void BM_MatmulParallel(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const Matrix a = sample_gaussian(n, n, 1), b = sample_gaussian(n, n, 2);
    Matrix c(n, n);
    for (auto _ : state) {
        kernels::matmul(a, b, c);
        benchmark::DoNotOptimize(c.data());
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}

void BM_MatmulNtReference(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const Matrix a = sample_gaussian(n, n, 3), b = sample_gaussian(n, n, 4);
    Matrix c(n, n);
    for (auto _ : state) {
        kernels::reference::matmul_nt(a, b, c);
        benchmark::DoNotOptimize(c.data());
    }
}

void BM_MatmulNtParallel(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    const Matrix a = sample_gaussian(n, n, 3), b = sample_gaussian(n, n, 4);
    Matrix c(n, n);
    for (auto _ : state) {
        kernels::matmul_nt(a, b, c);
        benchmark::DoNotOptimize(c.data());
    }
}

SweepSpec sweep_for(std::size_t heads) {
    SweepSpec s;
    s.seq_len = 32;
    s.head_dim = 16;
    s.head_counts = {heads};
    s.trials = 20;
    return s;
}

void BM_SweepSerial(benchmark::State& state) {
    const auto h = static_cast<std::size_t>(state.range(0));
    const SweepSpec s = sweep_for(h);
    for (auto _ : state) benchmark::DoNotOptimize(reference::concat_kappa_trials(s, h));
}

void BM_SweepParallel(benchmark::State& state) {
    const auto h = static_cast<std::size_t>(state.range(0));
    const SweepSpec s = sweep_for(h);
    for (auto _ : state) benchmark::DoNotOptimize(concat_kappa_trials(s, h));
}

}  // namespace

BENCHMARK(BM_MatmulReference)->Arg(64)->Arg(128)->Arg(256)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_MatmulParallel)->Arg(64)->Arg(128)->Arg(256)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_MatmulNtReference)->Arg(128)->Arg(256)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_MatmulNtParallel)->Arg(128)->Arg(256)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_SweepSerial)->Arg(4)->Arg(16)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SweepParallel)->Arg(4)->Arg(16)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
