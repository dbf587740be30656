// Training objectives: multi-view contrastive loss over one anchor and
// arbitrarily many positive/negative embeddings, categorical cross-entropy,
// and mean squared reconstruction error.
//
//   L = -log[ sum_i exp(sim(z*, z_i+)/tau)
//             / (sum_i exp(sim(z*, z_i+)/tau) + sum_j w_j exp(sim(z*, z_j-)/tau)) ]
//
// sim is cosine similarity with an epsilon-regularized norm; exponents are
// stabilized by max-logit subtraction; the batch loss is the mean over
// anchors.

#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <limits>
#include <vector>

#include "collossl/common.hpp"

namespace collossl::loss {

template <typename T>
using MatX = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using VecX = Eigen::Matrix<T, Eigen::Dynamic, 1>;

inline constexpr double kNormEpsilon = 1e-8;  // added to norms for zero vectors
inline constexpr double kProbFloor = 1e-12;   // clamp inside log for cross-entropy

// ---------------------------------------------------------------------------
// Single-anchor multi-view contrastive loss
// ---------------------------------------------------------------------------

struct MclInputs {
    std::vector<double> anchor;
    std::vector<std::vector<double>> positives;
    std::vector<std::vector<double>> negatives;
    std::vector<double> weights;  // aligned with negatives
    double temperature = 0.05;
};

double multiview_contrastive_loss(const MclInputs& inputs);

// ---------------------------------------------------------------------------
// Cosine similarity with epsilon-regularized norms
// ---------------------------------------------------------------------------

template <typename T>
T cosine_sim(const T* a, const T* b, std::int64_t dim, bool* warned_zero = nullptr) {
    T dot = 0, na2 = 0, nb2 = 0;
    for (std::int64_t i = 0; i < dim; ++i) {
        dot += a[i] * b[i];
        na2 += a[i] * a[i];
        nb2 += b[i] * b[i];
    }
    const T na = std::sqrt(na2);
    const T nb = std::sqrt(nb2);
    if ((na == T(0) || nb == T(0)) && warned_zero && !*warned_zero) {
        std::cerr << "warning: zero-norm embedding in cosine similarity; "
                     "using epsilon-regularized norm\n";
        *warned_zero = true;
    }
    return dot / ((na + T(kNormEpsilon)) * (nb + T(kNormEpsilon)));
}

// d sim / d a and d sim / d b for the epsilon-regularized cosine above.
template <typename T>
void cosine_sim_backward(const T* a, const T* b, std::int64_t dim, T dsim, T* da_out, T* db_out) {
    T dot = 0, na2 = 0, nb2 = 0;
    for (std::int64_t i = 0; i < dim; ++i) {
        dot += a[i] * b[i];
        na2 += a[i] * a[i];
        nb2 += b[i] * b[i];
    }
    const T na = std::sqrt(na2);
    const T nb = std::sqrt(nb2);
    const T ra = na + T(kNormEpsilon);
    const T rb = nb + T(kNormEpsilon);
    const T inv = T(1) / (ra * rb);
    // d/da dot/(ra rb) = b/(ra rb) - dot * (a/na) / (ra^2 rb); the norm
    // derivative vanishes at a == 0.
    const T ca = na > T(0) ? dot / (na * ra * ra * rb) : T(0);
    const T cb = nb > T(0) ? dot / (nb * ra * rb * rb) : T(0);
    for (std::int64_t i = 0; i < dim; ++i) {
        if (da_out) da_out[i] += dsim * (b[i] * inv - ca * a[i]);
        if (db_out) db_out[i] += dsim * (a[i] * inv - cb * b[i]);
    }
}

// ---------------------------------------------------------------------------
// Batched multi-view contrastive loss with analytic gradients
// ---------------------------------------------------------------------------

// One negative device: its full embedding matrix plus the asynchronous row
// chosen for each anchor row, and the device weight.
template <typename T>
struct NegativeSet {
    const MatX<T>* embeddings = nullptr;
    const std::vector<std::int32_t>* rows = nullptr;
    T weight = T(1);
};

template <typename T>
struct MclBatchResult {
    T loss = T(0);
    MatX<T> danchor;
    std::vector<MatX<T>> dpositives;
    std::vector<MatX<T>> dnegatives;  // scatter-accumulated over chosen rows
};

template <typename T>
MclBatchResult<T> mcl_batch(const MatX<T>& anchor, const std::vector<const MatX<T>*>& positives,
                            const std::vector<NegativeSet<T>>& negatives, T tau,
                            bool want_grads = true) {
    if (positives.empty()) throw ConfigError("multi-view contrastive loss needs >= 1 positive");
    if (!(tau > T(0))) throw ConfigError("temperature must be positive");
    const auto batch = anchor.rows();
    const auto dim = anchor.cols();
    for (const auto* p : positives) {
        if (p->rows() != batch || p->cols() != dim) {
            throw DataError("positive embedding shape mismatch");
        }
    }
    for (const auto& n : negatives) {
        if (n.embeddings->rows() != batch || n.embeddings->cols() != dim) {
            throw DataError("negative embedding shape mismatch");
        }
        if (static_cast<Eigen::Index>(n.rows->size()) != batch) {
            throw DataError("negative row map size mismatch");
        }
    }

    MclBatchResult<T> result;
    if (want_grads) {
        result.danchor = MatX<T>::Zero(batch, dim);
        for (size_t i = 0; i < positives.size(); ++i) {
            result.dpositives.push_back(MatX<T>::Zero(batch, dim));
        }
        for (size_t j = 0; j < negatives.size(); ++j) {
            result.dnegatives.push_back(MatX<T>::Zero(batch, dim));
        }
    }

    bool warned = false;
    const T inv_batch = T(1) / static_cast<T>(batch);
    std::vector<T> pos_sims(positives.size());
    std::vector<T> neg_sims(negatives.size());
    for (Eigen::Index b = 0; b < batch; ++b) {
        const T* za = anchor.row(b).data();
        T max_logit = std::numeric_limits<T>::lowest();
        for (size_t i = 0; i < positives.size(); ++i) {
            pos_sims[i] = cosine_sim(za, positives[i]->row(b).data(), dim, &warned) / tau;
            max_logit = std::max(max_logit, pos_sims[i]);
        }
        for (size_t j = 0; j < negatives.size(); ++j) {
            const auto r = (*negatives[j].rows)[static_cast<size_t>(b)];
            neg_sims[j] = cosine_sim(za, negatives[j].embeddings->row(r).data(), dim, &warned) / tau;
            max_logit = std::max(max_logit, neg_sims[j]);
        }

        T pos_sum = T(0), neg_sum = T(0);
        for (size_t i = 0; i < positives.size(); ++i) pos_sum += std::exp(pos_sims[i] - max_logit);
        for (size_t j = 0; j < negatives.size(); ++j) {
            neg_sum += negatives[j].weight * std::exp(neg_sims[j] - max_logit);
        }
        result.loss += (std::log(pos_sum + neg_sum) - std::log(pos_sum)) * inv_batch;

        if (!want_grads) continue;
        const T inv_total = T(1) / (pos_sum + neg_sum);
        const T inv_pos = T(1) / pos_sum;
        for (size_t i = 0; i < positives.size(); ++i) {
            const T e = std::exp(pos_sims[i] - max_logit);
            const T dsim = (e * inv_total - e * inv_pos) * inv_batch / tau;
            cosine_sim_backward(za, positives[i]->row(b).data(), dim, dsim,
                                result.danchor.row(b).data(), result.dpositives[i].row(b).data());
        }
        for (size_t j = 0; j < negatives.size(); ++j) {
            const auto r = (*negatives[j].rows)[static_cast<size_t>(b)];
            const T e = negatives[j].weight * std::exp(neg_sims[j] - max_logit);
            const T dsim = e * inv_total * inv_batch / tau;
            cosine_sim_backward(za, negatives[j].embeddings->row(r).data(), dim, dsim,
                                result.danchor.row(b).data(), result.dnegatives[j].row(r).data());
        }
    }
    return result;
}

// ---------------------------------------------------------------------------
// Categorical cross-entropy and reconstruction error
// ---------------------------------------------------------------------------

template <typename T>
T cross_entropy(const MatX<T>& probabilities, const std::vector<int>& labels) {
    if (static_cast<Eigen::Index>(labels.size()) != probabilities.rows()) {
        throw DataError("cross_entropy: label count != probability rows");
    }
    T total = T(0);
    for (Eigen::Index b = 0; b < probabilities.rows(); ++b) {
        const int y = labels[static_cast<size_t>(b)];
        if (y < 0 || y >= static_cast<int>(probabilities.cols())) {
            throw DataError("cross_entropy: label out of range");
        }
        total += -std::log(std::max(probabilities(b, y), T(kProbFloor)));
    }
    return total / static_cast<T>(probabilities.rows());
}

template <typename T>
T mse(const MatX<T>& reconstruction, const MatX<T>& input) {
    if (reconstruction.rows() != input.rows() || reconstruction.cols() != input.cols()) {
        throw DataError("mse: shape mismatch");
    }
    const auto diff = (reconstruction - input).eval();
    return diff.squaredNorm() / static_cast<T>(diff.size());
}

}  // namespace collossl::loss
