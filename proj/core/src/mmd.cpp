#include "collossl/mmd.hpp"

#include <algorithm>
#include <cmath>

namespace collossl::mmd {

namespace {

// Squared pairwise distances via |a|^2 + |b|^2 - 2 a.b, clamped at 0.
Matrix squared_distances(const Matrix& a, const Matrix& b) {
    Eigen::VectorXd an = a.rowwise().squaredNorm();
    Eigen::VectorXd bn = b.rowwise().squaredNorm();
    Matrix d2 = -2.0 * (a * b.transpose());
    d2.colwise() += an;
    d2.rowwise() += bn.transpose();
    return d2.cwiseMax(0.0);
}

double mean_kernel(const Matrix& a, const Matrix& b, double sigma) {
    const Matrix d2 = squared_distances(a, b);
    const double inv = 1.0 / (2.0 * sigma * sigma);
    double sum = 0.0;
    for (Eigen::Index i = 0; i < d2.rows(); ++i) {
        for (Eigen::Index j = 0; j < d2.cols(); ++j) {
            sum += std::exp(-d2(i, j) * inv);
        }
    }
    return sum / static_cast<double>(d2.rows() * d2.cols());
}

template <typename Source>
Matrix flatten_impl(const Source& src, int device, const std::vector<std::int64_t>& indices) {
    const auto dim = src.window_size();
    Matrix out(static_cast<Eigen::Index>(indices.size()), static_cast<Eigen::Index>(dim));
    for (size_t r = 0; r < indices.size(); ++r) {
        auto w = src.window(device, indices[r]);
        for (std::int64_t c = 0; c < dim; ++c) {
            out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                static_cast<double>(w[static_cast<size_t>(c)]);
        }
    }
    return out;
}

}  // namespace

Matrix flatten_windows(const data::MultiDeviceDataset& ds, int device,
                       const std::vector<std::int64_t>& indices) {
    return flatten_impl(ds, device, indices);
}

Matrix flatten_windows(const data::UnlabeledView& view, int device,
                       const std::vector<std::int64_t>& indices) {
    return flatten_impl(view, device, indices);
}

double median_heuristic_bandwidth(const std::vector<const Matrix*>& pool) {
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;
    for (const Matrix* m : pool) {
        rows += m->rows();
        cols = m->cols();
    }
    Matrix all(rows, cols);
    Eigen::Index at = 0;
    for (const Matrix* m : pool) {
        all.middleRows(at, m->rows()) = *m;
        at += m->rows();
    }
    const Matrix d2 = squared_distances(all, all);
    std::vector<double> upper;
    upper.reserve(static_cast<size_t>(rows) * (static_cast<size_t>(rows) - 1) / 2);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = i + 1; j < rows; ++j) {
            upper.push_back(d2(i, j));
        }
    }
    if (upper.empty()) return 1.0;
    auto mid = upper.begin() + static_cast<std::ptrdiff_t>(upper.size() / 2);
    std::nth_element(upper.begin(), mid, upper.end());
    const double median_sq = *mid;
    return std::max(std::sqrt(median_sq / 2.0), 1e-12);
}

MmdResult compute_mmd(const Matrix& x, const Matrix& y, const KernelSpec& kernel) {
    if (x.rows() < 2 || y.rows() < 2) {
        throw DataError("compute_mmd needs at least 2 samples per set, got " +
                        std::to_string(x.rows()) + " and " + std::to_string(y.rows()));
    }
    if (x.cols() != y.cols()) {
        throw DataError("compute_mmd dimension mismatch: " + std::to_string(x.cols()) + " vs " +
                        std::to_string(y.cols()));
    }
    const double sigma =
        kernel.median_heuristic ? median_heuristic_bandwidth({&x, &y}) : kernel.bandwidth;
    if (!(sigma > 0)) throw ConfigError("kernel bandwidth must be positive");

    const double kxx = mean_kernel(x, x, sigma);
    const double kyy = mean_kernel(y, y, sigma);
    const double kxy = mean_kernel(x, y, sigma);
    const double mmd2 = kxx + kyy - 2.0 * kxy;

    MmdResult result;
    result.value = std::sqrt(std::max(0.0, mmd2));
    result.bandwidth_used = sigma;
    result.n_x = x.rows();
    result.n_y = y.rows();
    return result;
}

PairwiseMmd pairwise_mmd(const Matrix& anchor,
                         const std::vector<std::pair<std::string, const Matrix*>>& candidates,
                         const KernelSpec& kernel) {
    if (candidates.empty()) throw DataError("pairwise_mmd: empty candidate list");
    double sigma = kernel.bandwidth;
    if (kernel.median_heuristic) {
        std::vector<const Matrix*> pool = {&anchor};
        for (const auto& [id, m] : candidates) pool.push_back(m);
        sigma = median_heuristic_bandwidth(pool);
    }
    PairwiseMmd out;
    out.bandwidth = sigma;
    for (const auto& [id, m] : candidates) {
        out.scores.push_back({id, compute_mmd(anchor, *m, KernelSpec::rbf(sigma)).value});
    }
    return out;
}

}  // namespace collossl::mmd
