// Shared helpers for the test suites: random data, independent oracles and
// a central-finite-difference engine for gradient checks.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "collossl/nn.hpp"

namespace testutil {

inline std::mt19937_64 rng(std::uint64_t seed) { return std::mt19937_64(seed); }

inline collossl::nn::MatX<double> random_matrix(std::int64_t rows, std::int64_t cols,
                                                std::mt19937_64& gen, double lo = -1.0,
                                                double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    collossl::nn::MatX<double> m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(gen);
    return m;
}

inline std::vector<double> random_vector(std::int64_t n, std::mt19937_64& gen, double lo = -1.0,
                                         double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> v(static_cast<size_t>(n));
    for (auto& x : v) x = u(gen);
    return v;
}

// Central finite differences on a sample of coordinates of each parameter
// tensor. `loss_fn` must recompute the full forward loss from current
// parameter values (deterministically). Returns the worst relative error.
//
// For piecewise-linear networks a central difference is only valid when no
// ReLU/argmax kink sits inside [w-h, w+h]; an optional `pattern_fn`
// (activation-pattern hash) detects and skips such coordinates. Coordinates
// actually checked are counted in *checked_out.
inline double gradient_check(const std::vector<collossl::nn::ParamRef<double>>& params,
                             const std::function<double()>& loss_fn,
                             std::mt19937_64& gen, double h = 1e-3,
                             size_t coords_per_tensor = 24,
                             const std::function<std::uint64_t()>& pattern_fn = nullptr,
                             size_t* checked_out = nullptr, size_t* skipped_out = nullptr) {
    double worst = 0.0;
    size_t checked = 0, skipped = 0;
    for (const auto& p : params) {
        const size_t n = p.value->size();
        std::vector<size_t> coords;
        if (n <= coords_per_tensor) {
            for (size_t i = 0; i < n; ++i) coords.push_back(i);
        } else {
            std::uniform_int_distribution<size_t> pick(0, n - 1);
            for (size_t i = 0; i < coords_per_tensor; ++i) coords.push_back(pick(gen));
        }
        for (size_t i : coords) {
            const double saved = (*p.value)[i];
            (*p.value)[i] = saved + h;
            const double up = loss_fn();
            const std::uint64_t pattern_up = pattern_fn ? pattern_fn() : 0;
            (*p.value)[i] = saved - h;
            const double down = loss_fn();
            const std::uint64_t pattern_down = pattern_fn ? pattern_fn() : 0;
            (*p.value)[i] = saved;
            if (pattern_fn && pattern_up != pattern_down) {
                ++skipped;
                continue;
            }
            const double numeric = (up - down) / (2.0 * h);
            const double analytic = (*p.grad)[i];
            const double err =
                std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
            worst = std::max(worst, err);
            ++checked;
        }
    }
    if (checked_out) *checked_out = checked;
    if (skipped_out) *skipped_out = skipped;
    return worst;
}

inline std::uint64_t hash_bytes(const void* data, size_t n, std::uint64_t h) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
        h ^= bytes[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

// Activation-pattern hash of an extractor forward context (ReLU masks and
// pooling argmax indices).
template <typename T>
std::uint64_t extractor_pattern(const typename collossl::nn::FeatureExtractor<T>::Ctx& ctx) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const auto* mask : {&ctx.r1.mask, &ctx.r2.mask, &ctx.r3.mask}) {
        h = hash_bytes(mask->data(), mask->size(), h);
    }
    h = hash_bytes(ctx.gmp.argmax.data(), ctx.gmp.argmax.size() * sizeof(std::int32_t), h);
    return h;
}

}  // namespace testutil
