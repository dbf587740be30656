#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

#include "collossl/sampling.hpp"
#include "collossl/synth.hpp"
#include "test_util.hpp"

using namespace collossl;

namespace {

selection::SelectionResult fake_selection(int num_negatives) {
    selection::SelectionResult sel;
    sel.anchor_id = "anchor";
    sel.positive_ids = {"p0"};
    for (int j = 0; j < num_negatives; ++j) {
        sel.negative_weights.push_back({"n" + std::to_string(j), 1.0});
    }
    return sel;
}

}  // namespace

TEST_CASE("one full-size batch is a permutation of all indices") {
    sampling::EpochSampler sampler(10, 10, false, make_rng(1, "s"));
    std::vector<std::int64_t> batch;
    REQUIRE(sampler.next(batch));
    std::vector<std::int64_t> sorted = batch;
    std::sort(sorted.begin(), sorted.end());
    for (std::int64_t i = 0; i < 10; ++i) CHECK(sorted[static_cast<size_t>(i)] == i);
    CHECK_FALSE(sampler.next(batch));
}

TEST_CASE("partial final batches are dropped or kept as configured") {
    sampling::EpochSampler drop(10, 4, false, make_rng(2, "s"));
    std::vector<std::int64_t> batch;
    int batches = 0;
    while (drop.next(batch)) ++batches;
    CHECK(batches == 2);
    CHECK(drop.batches_per_epoch() == 2);

    sampling::EpochSampler keep(10, 4, true, make_rng(2, "s"));
    std::vector<std::int64_t> sizes;
    while (keep.next(batch)) sizes.push_back(static_cast<std::int64_t>(batch.size()));
    CHECK(sizes == std::vector<std::int64_t>{4, 4, 2});
}

TEST_CASE("same seed gives the identical permutation sequence across epochs") {
    auto collect = [](std::uint64_t seed) {
        sampling::EpochSampler sampler(64, 16, false, make_rng(seed, "epochs"));
        std::vector<std::int64_t> all;
        std::vector<std::int64_t> batch;
        for (int epoch = 0; epoch < 3; ++epoch) {
            if (epoch > 0) sampler.reshuffle();
            while (sampler.next(batch)) all.insert(all.end(), batch.begin(), batch.end());
        }
        return all;
    };
    CHECK(collect(7) == collect(7));
    CHECK(collect(7) != collect(8));
}

TEST_CASE("B = 2 forces the swapped negative rows") {
    auto sel = fake_selection(1);
    Rng rng = make_rng(3, "rows");
    auto batch = sampling::resolve_contrastive({100, 101}, sel, rng);
    CHECK(batch.negative_rows[0][0] == 1);
    CHECK(batch.negative_rows[0][1] == 0);
}

TEST_CASE("asynchronous invariant holds over 1000 resolved batches") {
    auto sel = fake_selection(3);
    Rng rng = make_rng(4, "rows");
    std::vector<std::int64_t> indices(32);
    for (std::int64_t i = 0; i < 32; ++i) indices[static_cast<size_t>(i)] = i * 7;
    int violations = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        auto batch = sampling::resolve_contrastive(indices, sel, rng);
        for (const auto& rows : batch.negative_rows) {
            for (size_t b = 0; b < rows.size(); ++b) {
                if (rows[b] == static_cast<std::int32_t>(b)) ++violations;
                if (rows[b] < 0 || rows[b] >= 32) ++violations;
            }
        }
    }
    CHECK(violations == 0);
}

TEST_CASE("synchronous ablation sets every negative row to the anchor row") {
    auto sel = fake_selection(2);
    Rng rng = make_rng(5, "rows");
    std::vector<std::int64_t> indices(16);
    for (std::int64_t i = 0; i < 16; ++i) indices[static_cast<size_t>(i)] = i;
    auto batch = sampling::resolve_contrastive(indices, sel, rng,
                                               sampling::NegativeMode::synchronous);
    for (const auto& rows : batch.negative_rows) {
        for (size_t b = 0; b < rows.size(); ++b) {
            CHECK(rows[b] == static_cast<std::int32_t>(b));
        }
    }
}

TEST_CASE("batch of one cannot resolve asynchronously") {
    auto sel = fake_selection(1);
    Rng rng = make_rng(6, "rows");
    CHECK_THROWS_AS((void)sampling::resolve_contrastive({0}, sel, rng), ConfigError);
    CHECK_NOTHROW((void)sampling::resolve_contrastive({0}, sel, rng,
                                                     sampling::NegativeMode::synchronous));
}

template <typename T>
constexpr bool has_labels_member = requires(T t) { t.labels; };

TEST_CASE("positive rows stay index-matched and operations never see labels") {
    // resolve_contrastive takes indices and a selection only; the type
    // system keeps labels out of reach.
    static_assert(!has_labels_member<sampling::ContrastiveBatch>);

    auto sel = fake_selection(1);
    Rng rng = make_rng(7, "rows");
    auto batch = sampling::resolve_contrastive({5, 9, 2, 11}, sel, rng);
    CHECK(batch.batch_time_indices == std::vector<std::int64_t>{5, 9, 2, 11});
    CHECK(batch.positive_ids == std::vector<std::string>{"p0"});
}

TEST_CASE("negative label collision rate matches the class marginal") {
    // On a labeled synthetic batch, the probability that an asynchronous
    // negative shares the anchor's label should match the in-batch label
    // marginal (Monte-Carlo against the analytic expectation).
    synth::SynthConfig cfg;
    cfg.num_devices = 2;
    cfg.num_classes = 4;
    cfg.num_subjects = 2;
    cfg.windows_per_subject_per_class = 16;
    cfg.sampling_rate_hz = 16;
    cfg.window_seconds = 0.5;
    cfg.seed = 11;
    auto ds = synth::generate(cfg);
    const std::int64_t batch_size = 64;

    auto sampler_rng = make_rng(12, "mc");
    sampling::EpochSampler sampler(ds.num_windows, batch_size, false, make_rng(13, "mc"));
    auto sel = fake_selection(1);

    std::int64_t collisions = 0, draws = 0;
    double expected_rate_sum = 0.0;
    int batch_count = 0;
    std::vector<std::int64_t> indices;
    for (int epoch = 0; epoch < 40; ++epoch) {
        if (epoch > 0) sampler.reshuffle();
        while (sampler.next(indices)) {
            auto resolved = sampling::resolve_contrastive(indices, sel, sampler_rng);
            // analytic collision chance for this batch: for each anchor row,
            // (#same-label rows - 1) / (B - 1)
            for (size_t b = 0; b < indices.size(); ++b) {
                const int label = ds.labels[static_cast<size_t>(indices[b])];
                std::int64_t same = 0;
                for (std::int64_t idx : indices) {
                    if (ds.labels[static_cast<size_t>(idx)] == label) ++same;
                }
                expected_rate_sum += static_cast<double>(same - 1) /
                                     static_cast<double>(batch_size - 1);
                const auto r = resolved.negative_rows[0][b];
                if (ds.labels[static_cast<size_t>(indices[static_cast<size_t>(r)])] == label) {
                    ++collisions;
                }
                ++draws;
            }
            ++batch_count;
        }
    }
    const double observed = static_cast<double>(collisions) / static_cast<double>(draws);
    const double expected = expected_rate_sum / static_cast<double>(draws);
    // 3 sigma of a Bernoulli average
    const double sigma = std::sqrt(expected * (1 - expected) / static_cast<double>(draws));
    CHECK(std::abs(observed - expected) < 3.0 * sigma + 1e-9);
    CHECK(batch_count > 0);
}
