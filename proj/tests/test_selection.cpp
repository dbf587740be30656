#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>

#include "collossl/selection.hpp"
#include "test_util.hpp"

using namespace collossl;

namespace {

const std::vector<std::pair<std::string, double>> kBodyScores = {
    {"head", 0.45}, {"waist", 0.61},    {"thigh", 0.67},
    {"upperarm", 0.77}, {"forearm", 0.83}, {"shin", 1.51},
};

}  // namespace

TEST_CASE("inverse-MMD weights match the hand arithmetic") {
    // raw = 1/score: {2.222, 1.639, 1.493, 1.299, 1.205, 0.662}; dividing by
    // the maximum gives {1.0, 0.738, 0.672, 0.584, 0.542, 0.298}.
    const std::vector<double> raw = {2.222, 1.639, 1.493, 1.299, 1.205, 0.662};
    for (size_t i = 0; i < raw.size(); ++i) {
        CHECK(1.0 / kBodyScores[i].second == doctest::Approx(raw[i]).epsilon(1e-3));
    }
    auto weights = selection::inverse_mmd_weights(kBodyScores);
    const std::vector<double> expected = {1.0, 0.738, 0.672, 0.584, 0.542, 0.298};
    REQUIRE(weights.size() == expected.size());
    for (size_t i = 0; i < expected.size(); ++i) {
        CHECK(weights[i].first == kBodyScores[i].first);
        CHECK(weights[i].second == doctest::Approx(expected[i]).epsilon(1e-3));
    }
    CHECK(weights[0].second == 1.0);  // max-normalized exactly
}

TEST_CASE("weights order inversely to MMD scores") {
    auto weights = selection::inverse_mmd_weights(kBodyScores);
    for (size_t i = 0; i + 1 < weights.size(); ++i) {
        CHECK(weights[i].second > weights[i + 1].second);
    }
}

TEST_CASE("zero MMD is capped before inversion and lands at weight 1") {
    // raw = {1/1e-8, 1/0.5} = {1e8, 2}; normalized by max = {1, 2e-8}
    auto weights = selection::inverse_mmd_weights({{"dup", 0.0}, {"other", 0.5}});
    CHECK(weights[0].second == 1.0);
    CHECK(weights[1].second == doctest::Approx(2e-8).epsilon(1e-9));
}

TEST_CASE("collossl strategy: closest candidate is positive, all are weighted negatives") {
    auto gen = testutil::rng(41);
    const auto anchor = testutil::random_matrix(24, 16, gen);
    mmd::Matrix near = anchor;
    near.array() += 0.02;
    mmd::Matrix mid = anchor;
    mid.array() += 0.6;
    mmd::Matrix far = anchor;
    far.array() += 2.5;

    Rng rng = make_rng(1, "test");
    auto sel = selection::select_devices(
        "anchor", anchor, {{"far", &far}, {"near", &near}, {"mid", &mid}},
        selection::Strategy::collossl, rng);

    CHECK(sel.positive_ids.size() == 1);
    CHECK(sel.positive_ids[0] == "near");
    REQUIRE(sel.negative_weights.size() == 3);  // every candidate, positive included
    double max_w = 0;
    for (const auto& [id, w] : sel.negative_weights) max_w = std::max(max_w, w);
    CHECK(max_w == 1.0);
    // weight order mirrors inverse MMD order
    std::map<std::string, double> w(sel.negative_weights.begin(), sel.negative_weights.end());
    CHECK(w["near"] == 1.0);
    CHECK(w["near"] > w["mid"]);
    CHECK(w["mid"] > w["far"]);
}

TEST_CASE("ties break by candidate order") {
    auto gen = testutil::rng(43);
    const auto anchor = testutil::random_matrix(16, 8, gen);
    mmd::Matrix copy1 = anchor;
    mmd::Matrix copy2 = anchor;
    Rng rng = make_rng(2, "test");
    auto sel = selection::select_devices("anchor", anchor, {{"b", &copy1}, {"a", &copy2}},
                                         selection::Strategy::collossl, rng);
    CHECK(sel.positive_ids[0] == "b");  // first in candidate order wins the tie
}

TEST_CASE("single candidate is both positive and sole negative with weight 1") {
    auto gen = testutil::rng(47);
    const auto anchor = testutil::random_matrix(12, 10, gen);
    mmd::Matrix only = anchor;
    only.array() += 0.3;
    Rng rng = make_rng(3, "test");
    auto sel = selection::select_devices("anchor", anchor, {{"only", &only}},
                                         selection::Strategy::collossl, rng);
    CHECK(sel.positive_ids == std::vector<std::string>{"only"});
    REQUIRE(sel.negative_weights.size() == 1);
    CHECK(sel.negative_weights[0].second == 1.0);
}

TEST_CASE("unweighted strategy keeps closest positive but flattens weights") {
    auto gen = testutil::rng(53);
    const auto anchor = testutil::random_matrix(16, 8, gen);
    mmd::Matrix near = anchor;
    near.array() += 0.05;
    mmd::Matrix far = anchor;
    far.array() += 1.5;
    Rng rng = make_rng(4, "test");
    auto sel = selection::select_devices("anchor", anchor, {{"near", &near}, {"far", &far}},
                                         selection::Strategy::unweighted, rng);
    CHECK(sel.positive_ids[0] == "near");
    for (const auto& [id, w] : sel.negative_weights) CHECK(w == 1.0);
}

TEST_CASE("random strategies are seed-deterministic") {
    auto gen = testutil::rng(59);
    const auto anchor = testutil::random_matrix(8, 6, gen);
    mmd::Matrix a = anchor, b = anchor, c = anchor;
    a.array() += 0.1;
    b.array() += 0.9;
    c.array() += 1.7;
    std::vector<std::pair<std::string, const mmd::Matrix*>> candidates = {
        {"a", &a}, {"b", &b}, {"c", &c}};

    for (auto strategy :
         {selection::Strategy::random, selection::Strategy::closest_pos_random_neg}) {
        Rng r1 = make_rng(9, "det");
        Rng r2 = make_rng(9, "det");
        auto s1 = selection::select_devices("anchor", anchor, candidates, strategy, r1);
        auto s2 = selection::select_devices("anchor", anchor, candidates, strategy, r2);
        CHECK(s1.positive_ids == s2.positive_ids);
        REQUIRE(s1.negative_weights.size() == 1);
        CHECK(s1.negative_weights[0].first == s2.negative_weights[0].first);
        CHECK(s1.negative_weights[0].second == 1.0);
    }

    // closest_pos_random_neg still picks the closest positive
    Rng r = make_rng(10, "det");
    auto s = selection::select_devices("anchor", anchor, candidates,
                                       selection::Strategy::closest_pos_random_neg, r);
    CHECK(s.positive_ids[0] == "a");
}

TEST_CASE("argmin positive is invariant to common scaling with matched bandwidth") {
    auto gen = testutil::rng(61);
    const auto anchor = testutil::random_matrix(20, 12, gen);
    mmd::Matrix near = anchor;
    near.array() += 0.1;
    mmd::Matrix far = anchor;
    far.array() += 1.0;
    std::vector<std::pair<std::string, const mmd::Matrix*>> candidates = {{"near", &near},
                                                                          {"far", &far}};
    Rng r1 = make_rng(5, "scale");
    auto base = selection::select_devices("anchor", anchor, candidates,
                                          selection::Strategy::collossl, r1,
                                          mmd::KernelSpec::rbf(0.7));

    mmd::Matrix anchor2 = 3.0 * anchor;
    mmd::Matrix near2 = 3.0 * near;
    mmd::Matrix far2 = 3.0 * far;
    std::vector<std::pair<std::string, const mmd::Matrix*>> scaled = {{"near", &near2},
                                                                      {"far", &far2}};
    Rng r2 = make_rng(5, "scale");
    auto rescaled = selection::select_devices("anchor", anchor2, scaled,
                                              selection::Strategy::collossl, r2,
                                              mmd::KernelSpec::rbf(2.1));
    CHECK(base.positive_ids == rescaled.positive_ids);
    for (size_t i = 0; i < base.negative_weights.size(); ++i) {
        CHECK(base.negative_weights[i].second ==
              doctest::Approx(rescaled.negative_weights[i].second).epsilon(1e-9));
    }
}

TEST_CASE("empty candidate set is rejected") {
    auto gen = testutil::rng(67);
    const auto anchor = testutil::random_matrix(4, 4, gen);
    Rng rng = make_rng(6, "err");
    CHECK_THROWS_AS((void)selection::select_devices("anchor", anchor, {},
                                                    selection::Strategy::collossl, rng),
                    DataError);
}
