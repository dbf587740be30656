// Kernel two-sample Maximum Mean Discrepancy between batches of flattened
// windows. Biased V-statistic with an RBF kernel; value = sqrt(max(0, mmd2)).

#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "collossl/common.hpp"
#include "collossl/dataset.hpp"

namespace collossl::mmd {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct KernelSpec {
    // rbf is the only family: k(a,b) = exp(-|a-b|^2 / (2 sigma^2)).
    double bandwidth = 0.0;        // sigma; ignored when median_heuristic
    bool median_heuristic = true;  // sigma^2 = median(|a-b|^2) / 2 over the pool

    static KernelSpec rbf(double sigma) {
        if (!(sigma > 0)) throw ConfigError("rbf bandwidth must be positive");
        return KernelSpec{sigma, false};
    }
    static KernelSpec median() { return KernelSpec{}; }
};

struct MmdResult {
    double value = 0.0;  // >= 0 after clamping the squared statistic at 0
    double bandwidth_used = 0.0;
    std::int64_t n_x = 0;
    std::int64_t n_y = 0;
    static constexpr const char* estimator = "biased";
};

// Flattens selected windows of one device into rows of [n, W*C].
Matrix flatten_windows(const data::MultiDeviceDataset& ds, int device,
                       const std::vector<std::int64_t>& indices);
Matrix flatten_windows(const data::UnlabeledView& view, int device,
                       const std::vector<std::int64_t>& indices);

// Median-heuristic bandwidth over a pooled sample set: sigma =
// sqrt(median of squared pairwise distances / 2), distances taken over all
// unordered pairs of pooled rows. Floored at a tiny epsilon so an
// all-identical pool stays finite.
double median_heuristic_bandwidth(const std::vector<const Matrix*>& pool);

// Biased-estimator MMD between two sample sets (rows = samples). Requires
// n, m >= 2 and matching dimension. With median_heuristic the bandwidth is
// pooled over x and y only.
MmdResult compute_mmd(const Matrix& x, const Matrix& y, const KernelSpec& kernel);

struct PairwiseMmd {
    double bandwidth = 0.0;
    // Candidate order preserved; value per candidate vs the anchor batch.
    std::vector<std::pair<std::string, double>> scores;
};

// One MMD per candidate against the anchor, all sharing one median-heuristic
// bandwidth pooled over (anchor plus every candidate) so scores are
// comparable. An explicit kernel bandwidth overrides the pooling.
PairwiseMmd pairwise_mmd(const Matrix& anchor,
                         const std::vector<std::pair<std::string, const Matrix*>>& candidates,
                         const KernelSpec& kernel = KernelSpec::median());

}  // namespace collossl::mmd
