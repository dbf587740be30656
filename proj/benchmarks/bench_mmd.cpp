#include <benchmark/benchmark.h>

#include <random>

#include "collossl/mmd.hpp"

using namespace collossl;

namespace {

mmd::Matrix random_batch(std::int64_t rows, std::int64_t cols, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    mmd::Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(gen);
    return m;
}

}  // namespace

static void BM_ComputeMmd(benchmark::State& state) {
    const auto n = state.range(0);
    const auto x = random_batch(n, 288, 1);  // 48 samples x 6 channels flattened
    const auto y = random_batch(n, 288, 2);
    const auto kernel = mmd::KernelSpec::rbf(4.0);
    for (auto _ : state) {
        benchmark::DoNotOptimize(mmd::compute_mmd(x, y, kernel).value);
    }
}
BENCHMARK(BM_ComputeMmd)->Arg(64)->Arg(128)->Arg(256);

static void BM_MedianHeuristic(benchmark::State& state) {
    const auto n = state.range(0);
    const auto x = random_batch(n, 288, 3);
    const auto y = random_batch(n, 288, 4);
    for (auto _ : state) {
        benchmark::DoNotOptimize(mmd::median_heuristic_bandwidth({&x, &y}));
    }
}
BENCHMARK(BM_MedianHeuristic)->Arg(128)->Arg(256);

static void BM_PairwiseSelectionMmd(benchmark::State& state) {
    // One per-batch device selection: anchor vs 4 candidates, shared
    // median-heuristic bandwidth.
    const auto n = state.range(0);
    const auto anchor = random_batch(n, 288, 5);
    std::vector<mmd::Matrix> batches;
    std::vector<std::pair<std::string, const mmd::Matrix*>> candidates;
    for (int d = 0; d < 4; ++d) batches.push_back(random_batch(n, 288, 6 + d));
    for (int d = 0; d < 4; ++d) candidates.push_back({"dev" + std::to_string(d), &batches[d]});
    for (auto _ : state) {
        benchmark::DoNotOptimize(mmd::pairwise_mmd(anchor, candidates).scores.size());
    }
}
BENCHMARK(BM_PairwiseSelectionMmd)->Arg(64)->Arg(128);

BENCHMARK_MAIN();
