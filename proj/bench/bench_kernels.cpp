#include <cstdint>
#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "swan/kernels.hpp"

namespace k = swan::kernels;

static std::vector<double> random_vec(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> v(n);
    for (auto& x : v) x = u(rng);
    return v;
}

// Shapes mirror a training batch: 256 rows through a 240→32 expert layer.
template <bool Parallel>
static void BM_matmul(benchmark::State& state) {
    const std::size_t m = state.range(0), kk = state.range(1), n = state.range(2);
    auto a = random_vec(m * kk, 1), b = random_vec(kk * n, 2);
    std::vector<double> c(m * n);
    for (auto _ : state) {
        if constexpr (Parallel) k::matmul(a, b, c, m, kk, n);
        else k::serial::matmul(a, b, c, m, kk, n);
        benchmark::DoNotOptimize(c.data());
    }
    state.counters["MAC/s"] = benchmark::Counter(double(m * kk * n) * state.iterations(), benchmark::Counter::kIsRate);
}

template <bool Parallel>
static void BM_matmul_tn_acc(benchmark::State& state) {
    const std::size_t m = state.range(0), kk = state.range(1), n = state.range(2);
    auto a = random_vec(m * kk, 3), g = random_vec(m * n, 4);
    std::vector<double> out(kk * n);
    for (auto _ : state) {
        if constexpr (Parallel) k::matmul_tn_acc(a, g, out, m, kk, n);
        else k::serial::matmul_tn_acc(a, g, out, m, kk, n);
        benchmark::DoNotOptimize(out.data());
    }
    state.counters["MAC/s"] = benchmark::Counter(double(m * kk * n) * state.iterations(), benchmark::Counter::kIsRate);
}

template <bool Parallel>
static void BM_matmul_nt_acc(benchmark::State& state) {
    const std::size_t m = state.range(0), kk = state.range(1), n = state.range(2);
    auto g = random_vec(m * n, 5), b = random_vec(kk * n, 6);
    std::vector<double> out(m * kk);
    for (auto _ : state) {
        if constexpr (Parallel) k::matmul_nt_acc(g, b, out, m, kk, n);
        else k::serial::matmul_nt_acc(g, b, out, m, kk, n);
        benchmark::DoNotOptimize(out.data());
    }
    state.counters["MAC/s"] = benchmark::Counter(double(m * kk * n) * state.iterations(), benchmark::Counter::kIsRate);
}

template <bool Parallel>
static void BM_assign_nearest(benchmark::State& state) {
    const std::size_t n = state.range(0), kk = state.range(1), dim = 8;
    auto pts = random_vec(n * dim, 7), cents = random_vec(kk * dim, 8);
    std::vector<std::uint32_t> assignment(n);
    for (auto _ : state) {
        double inertia = Parallel ? k::assign_nearest(pts, cents, assignment, n, kk, dim)
                                  : k::serial::assign_nearest(pts, cents, assignment, n, kk, dim);
        benchmark::DoNotOptimize(inertia);
    }
}

template <bool Parallel>
static void BM_cluster_distances(benchmark::State& state) {
    const std::size_t n = state.range(0), kk = 3, dim = 8;
    auto pts = random_vec(n * dim, 9);
    std::vector<std::uint32_t> assignment(n);
    std::vector<std::size_t> sizes(kk, 0);
    for (std::size_t i = 0; i < n; ++i) {
        assignment[i] = static_cast<std::uint32_t>(i % kk);
        ++sizes[i % kk];
    }
    std::vector<double> out(n * kk);
    for (auto _ : state) {
        if constexpr (Parallel) k::mean_cluster_distances(pts, assignment, sizes, out, n, kk, dim);
        else k::serial::mean_cluster_distances(pts, assignment, sizes, out, n, kk, dim);
        benchmark::DoNotOptimize(out.data());
    }
}

#define MATMUL_ARGS ->Args({256, 240, 32})->Args({256, 32, 16})->Args({512, 512, 512})->Unit(benchmark::kMicrosecond)

BENCHMARK(BM_matmul<false>) MATMUL_ARGS;
BENCHMARK(BM_matmul<true>) MATMUL_ARGS;
BENCHMARK(BM_matmul_tn_acc<false>) MATMUL_ARGS;
BENCHMARK(BM_matmul_tn_acc<true>) MATMUL_ARGS;
BENCHMARK(BM_matmul_nt_acc<false>) MATMUL_ARGS;
BENCHMARK(BM_matmul_nt_acc<true>) MATMUL_ARGS;
BENCHMARK(BM_assign_nearest<false>)->Args({20000, 9})->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_assign_nearest<true>)->Args({20000, 9})->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_cluster_distances<false>)->Arg(500)->Arg(2000)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_cluster_distances<true>)->Arg(500)->Arg(2000)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
