#include "collossl/sampling.hpp"

#include <algorithm>
#include <numeric>

namespace collossl::sampling {

NegativeMode negative_mode_from_string(const std::string& s) {
    if (s == "asynchronous") return NegativeMode::asynchronous;
    if (s == "synchronous") return NegativeMode::synchronous;
    throw ConfigError("unknown sampling mode '" + s + "' (expected asynchronous|synchronous)");
}

std::string to_string(NegativeMode m) {
    return m == NegativeMode::asynchronous ? "asynchronous" : "synchronous";
}

EpochSampler::EpochSampler(std::int64_t num_windows, std::int64_t batch_size, bool keep_partial,
                           Rng rng)
    : batch_size_(batch_size), keep_partial_(keep_partial), rng_(rng) {
    if (num_windows < 1) throw DataError("EpochSampler: empty dataset");
    if (batch_size < 1) throw ConfigError("EpochSampler: batch_size must be >= 1");
    order_.resize(static_cast<size_t>(num_windows));
    std::iota(order_.begin(), order_.end(), 0);
    reshuffle();
}

void EpochSampler::reshuffle() {
    std::shuffle(order_.begin(), order_.end(), rng_);
    cursor_ = 0;
}

std::int64_t EpochSampler::batches_per_epoch() const {
    const auto n = static_cast<std::int64_t>(order_.size());
    return keep_partial_ ? (n + batch_size_ - 1) / batch_size_ : n / batch_size_;
}

bool EpochSampler::next(std::vector<std::int64_t>& out) {
    const auto n = static_cast<std::int64_t>(order_.size());
    if (cursor_ >= n) return false;
    const std::int64_t remaining = n - cursor_;
    const std::int64_t take = std::min(batch_size_, remaining);
    if (take < batch_size_ && !keep_partial_) return false;
    out.assign(order_.begin() + cursor_, order_.begin() + cursor_ + take);
    cursor_ += take;
    return true;
}

ContrastiveBatch resolve_contrastive(const std::vector<std::int64_t>& batch_indices,
                                     const selection::SelectionResult& sel, Rng& rng,
                                     NegativeMode mode) {
    const auto batch = static_cast<std::int64_t>(batch_indices.size());
    if (batch < 1) throw DataError("resolve_contrastive: empty batch");
    if (batch == 1 && mode == NegativeMode::asynchronous) {
        throw ConfigError("resolve_contrastive: batch of 1 has no asynchronous row t' != t");
    }

    ContrastiveBatch out;
    out.batch_time_indices = batch_indices;
    out.positive_ids = sel.positive_ids;
    for (const auto& [id, w] : sel.negative_weights) {
        out.negative_ids.push_back(id);
        out.negative_weights.push_back(w);
    }

    out.negative_rows.resize(out.negative_ids.size());
    std::uniform_int_distribution<std::int64_t> pick(0, batch - 2);
    for (auto& rows : out.negative_rows) {
        rows.resize(static_cast<size_t>(batch));
        for (std::int64_t b = 0; b < batch; ++b) {
            if (mode == NegativeMode::synchronous) {
                rows[static_cast<size_t>(b)] = static_cast<std::int32_t>(b);
            } else {
                // Uniform over [0, B) \ {b}.
                std::int64_t r = pick(rng);
                if (r >= b) ++r;
                rows[static_cast<size_t>(b)] = static_cast<std::int32_t>(r);
            }
        }
    }
    return out;
}

}  // namespace collossl::sampling
