#include <benchmark/benchmark.h>

#include <random>

#include "collossl/loss.hpp"
#include "collossl/nn.hpp"

using namespace collossl;

namespace {

nn::MatX<float> random_batch(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    nn::MatX<float> m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<float>(u(gen));
    return m;
}

constexpr std::int64_t kWindow = 48;

}  // namespace

static void BM_ExtractorForwardEval(benchmark::State& state) {
    const auto batch = state.range(0);
    nn::FeatureExtractor<float> extractor;
    extractor.init(1);
    const auto x = random_batch(batch, kWindow * 6, 2);
    Rng rng = make_rng(3, "bench");
    nn::FeatureExtractor<float>::Ctx ctx;
    for (auto _ : state) {
        benchmark::DoNotOptimize(extractor.forward(x, kWindow, false, rng, ctx).sum());
    }
    state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_ExtractorForwardEval)->Arg(128)->Arg(512);

static void BM_ExtractorForwardBackward(benchmark::State& state) {
    const auto batch = state.range(0);
    nn::FeatureExtractor<float> extractor;
    extractor.init(4);
    auto params = extractor.params("ext");
    const auto x = random_batch(batch, kWindow * 6, 5);
    Rng rng = make_rng(6, "bench");
    nn::FeatureExtractor<float>::Ctx ctx;
    for (auto _ : state) {
        auto emb = extractor.forward(x, kWindow, true, rng, ctx);
        nn::zero_gradients(params);
        benchmark::DoNotOptimize(extractor.backward(emb, ctx).sum());
    }
    state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_ExtractorForwardBackward)->Arg(128)->Arg(512);

static void BM_MclBatch(benchmark::State& state) {
    // One contrastive loss evaluation with gradients: anchor + positive +
    // three weighted negatives at batch 512.
    const Eigen::Index batch = 512;
    const auto anchor = random_batch(batch, 96, 7);
    const auto pos = random_batch(batch, 96, 8);
    std::vector<nn::MatX<float>> negs;
    for (int j = 0; j < 3; ++j) negs.push_back(random_batch(batch, 96, 9 + j));
    std::vector<std::int32_t> rows(batch);
    for (Eigen::Index b = 0; b < batch; ++b) {
        rows[static_cast<size_t>(b)] = static_cast<std::int32_t>((b + 7) % batch);
    }
    std::vector<loss::NegativeSet<float>> nsets;
    for (int j = 0; j < 3; ++j) nsets.push_back({&negs[static_cast<size_t>(j)], &rows, 0.7f});
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            loss::mcl_batch<float>(anchor, {&pos}, nsets, 0.05f, true).loss);
    }
}
BENCHMARK(BM_MclBatch);

BENCHMARK_MAIN();
