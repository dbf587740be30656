#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "collossl/mmd.hpp"
#include "test_util.hpp"

using namespace collossl;

namespace {

// Independent quadratic-time oracle: plain double sums, no vectorization,
// no shared code with the implementation.
double naive_mmd(const mmd::Matrix& x, const mmd::Matrix& y, double sigma) {
    auto kernel = [&](const mmd::Matrix& a, Eigen::Index i, const mmd::Matrix& b,
                      Eigen::Index j) {
        double d2 = 0.0;
        for (Eigen::Index c = 0; c < a.cols(); ++c) {
            const double diff = a(i, c) - b(j, c);
            d2 += diff * diff;
        }
        return std::exp(-d2 / (2.0 * sigma * sigma));
    };
    double kxx = 0.0, kyy = 0.0, kxy = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (Eigen::Index j = 0; j < x.rows(); ++j) kxx += kernel(x, i, x, j);
    }
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
        for (Eigen::Index j = 0; j < y.rows(); ++j) kyy += kernel(y, i, y, j);
    }
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (Eigen::Index j = 0; j < y.rows(); ++j) kxy += kernel(x, i, y, j);
    }
    kxx /= static_cast<double>(x.rows() * x.rows());
    kyy /= static_cast<double>(y.rows() * y.rows());
    kxy /= static_cast<double>(x.rows() * y.rows());
    return std::sqrt(std::max(0.0, kxx + kyy - 2.0 * kxy));
}

}  // namespace

TEST_CASE("identical sample sets have zero MMD") {
    auto gen = testutil::rng(7);
    const auto x = testutil::random_matrix(16, 12, gen);
    const auto r = mmd::compute_mmd(x, x, mmd::KernelSpec::rbf(1.0));
    CHECK(r.value == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("hand-computed two-point case") {
    // x = {0}, y = {1} in d=1, duplicated to n=m=2, sigma=1:
    // MMD^2 = 1 + 1 - 2 exp(-0.5)
    mmd::Matrix x(2, 1), y(2, 1);
    x << 0.0, 0.0;
    y << 1.0, 1.0;
    const auto r = mmd::compute_mmd(x, y, mmd::KernelSpec::rbf(1.0));
    const double expected_sq = 2.0 - 2.0 * std::exp(-0.5);
    CHECK(expected_sq == doctest::Approx(0.786938680574733).epsilon(1e-12));
    CHECK(r.value == doctest::Approx(std::sqrt(expected_sq)).epsilon(1e-12));
    CHECK(r.value == doctest::Approx(0.887095).epsilon(1e-5));
}

TEST_CASE("vectorized implementation matches the naive double-sum oracle") {
    auto gen = testutil::rng(11);
    std::uniform_int_distribution<int> size(2, 128);
    std::uniform_int_distribution<int> dims(1, 600);
    for (int trial = 0; trial < 12; ++trial) {
        const int n = size(gen), m = size(gen), d = dims(gen);
        const auto x = testutil::random_matrix(n, d, gen);
        const auto y = testutil::random_matrix(m, d, gen, -0.5, 1.5);
        const double sigma = 0.5 + 2.0 * std::uniform_real_distribution<double>(0, 1)(gen);
        const auto r = mmd::compute_mmd(x, y, mmd::KernelSpec::rbf(sigma));
        const double expected = naive_mmd(x, y, sigma);
        CHECK(r.value ==
              doctest::Approx(expected).epsilon(1e-9));
    }
}

TEST_CASE("the 600-dim n=m=64 case matches the oracle to 1e-9") {
    auto gen = testutil::rng(12);
    const auto x = testutil::random_matrix(64, 600, gen);
    const auto y = testutil::random_matrix(64, 600, gen, -0.2, 1.8);
    const double sigma = 6.0;
    const auto r = mmd::compute_mmd(x, y, mmd::KernelSpec::rbf(sigma));
    CHECK(r.value == doctest::Approx(naive_mmd(x, y, sigma)).epsilon(1e-9));
    CHECK(r.n_x == 64);
    CHECK(r.n_y == 64);
}

TEST_CASE("symmetry is exact") {
    auto gen = testutil::rng(13);
    const auto x = testutil::random_matrix(9, 20, gen);
    const auto y = testutil::random_matrix(14, 20, gen);
    const auto spec = mmd::KernelSpec::rbf(1.3);
    CHECK(mmd::compute_mmd(x, y, spec).value == mmd::compute_mmd(y, x, spec).value);
}

TEST_CASE("doubling inputs and bandwidth leaves MMD unchanged") {
    auto gen = testutil::rng(17);
    const auto x = testutil::random_matrix(24, 30, gen);
    const auto y = testutil::random_matrix(18, 30, gen, 0.0, 2.0);
    const auto base = mmd::compute_mmd(x, y, mmd::KernelSpec::rbf(0.9));
    const auto scaled = mmd::compute_mmd(mmd::Matrix(2.0 * x), mmd::Matrix(2.0 * y),
                                         mmd::KernelSpec::rbf(1.8));
    CHECK(scaled.value == doctest::Approx(base.value).epsilon(1e-9));
}

TEST_CASE("input validation") {
    auto gen = testutil::rng(3);
    const auto x = testutil::random_matrix(4, 5, gen);
    const auto one = testutil::random_matrix(1, 5, gen);
    const auto wrong = testutil::random_matrix(4, 6, gen);
    CHECK_THROWS_AS((void)mmd::compute_mmd(x, one, mmd::KernelSpec::rbf(1.0)), DataError);
    CHECK_THROWS_AS((void)mmd::compute_mmd(x, wrong, mmd::KernelSpec::rbf(1.0)), DataError);
    CHECK_THROWS_AS((void)mmd::pairwise_mmd(x, {}), DataError);
}

TEST_CASE("pairwise: anchor copies score zero, larger offsets score larger") {
    auto gen = testutil::rng(23);
    const auto anchor = testutil::random_matrix(32, 18, gen);
    mmd::Matrix near = anchor;
    near.array() += 0.05;
    mmd::Matrix far = anchor;
    far.array() += 2.0;
    mmd::Matrix copy1 = anchor;
    mmd::Matrix copy2 = anchor;

    auto zeros = mmd::pairwise_mmd(anchor, {{"a", &copy1}, {"b", &copy2}},
                                   mmd::KernelSpec::rbf(1.0));
    CHECK(zeros.scores[0].second == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(zeros.scores[1].second == doctest::Approx(0.0).epsilon(1e-9));

    auto offsets = mmd::pairwise_mmd(anchor, {{"near", &near}, {"far", &far}});
    CHECK(offsets.scores[0].second < offsets.scores[1].second);
}

TEST_CASE("pairwise preserves a constructed device ordering") {
    // Batches at increasing offsets from the anchor must come back in the
    // same order as the body-position table they mimic.
    auto gen = testutil::rng(29);
    const auto anchor = testutil::random_matrix(40, 24, gen);
    const std::vector<std::string> names = {"head", "waist", "thigh", "upperarm", "forearm",
                                            "shin"};
    std::vector<mmd::Matrix> batches;
    for (size_t i = 0; i < names.size(); ++i) {
        mmd::Matrix b = anchor + 0.15 * static_cast<double>(i + 1) *
                                     testutil::random_matrix(40, 24, gen, 0.5, 1.0);
        batches.push_back(std::move(b));
    }
    std::vector<std::pair<std::string, const mmd::Matrix*>> candidates;
    for (size_t i = 0; i < names.size(); ++i) candidates.push_back({names[i], &batches[i]});
    auto result = mmd::pairwise_mmd(anchor, candidates);
    for (size_t i = 0; i + 1 < result.scores.size(); ++i) {
        CHECK(result.scores[i].second < result.scores[i + 1].second);
    }
}

TEST_CASE("median heuristic bandwidth is shared across candidates") {
    auto gen = testutil::rng(31);
    const auto anchor = testutil::random_matrix(16, 8, gen);
    const auto c1 = testutil::random_matrix(16, 8, gen);
    const auto c2 = testutil::random_matrix(16, 8, gen, 0.0, 3.0);
    auto result = mmd::pairwise_mmd(anchor, {{"c1", &c1}, {"c2", &c2}});
    const double pooled = mmd::median_heuristic_bandwidth({&anchor, &c1, &c2});
    CHECK(result.bandwidth == doctest::Approx(pooled).epsilon(1e-12));
}
