// Contrastive sampling: epoch batching of time-aligned window indices, plus
// resolution of synchronous positive rows and asynchronous negative rows
// within a batch. Labels are never an input here.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "collossl/common.hpp"
#include "collossl/selection.hpp"

namespace collossl::sampling {

enum class NegativeMode {
    asynchronous,  // negative row t' drawn uniformly from [0,B) \ {b}
    synchronous,   // ablation: t' = b
};

NegativeMode negative_mode_from_string(const std::string& s);
std::string to_string(NegativeMode m);

// One epoch = a seeded permutation of [0, T) chunked into batches, the same
// indices on every device (time alignment). The final partial chunk is
// dropped or kept per `keep_partial`.
class EpochSampler {
public:
    EpochSampler(std::int64_t num_windows, std::int64_t batch_size, bool keep_partial, Rng rng);

    // Returns false at epoch end. `out` receives the global window indices
    // of the next batch.
    bool next(std::vector<std::int64_t>& out);

    void reshuffle();  // starts the next epoch
    std::int64_t batches_per_epoch() const;

private:
    std::vector<std::int64_t> order_;
    std::int64_t batch_size_;
    std::int64_t cursor_ = 0;
    bool keep_partial_;
    Rng rng_;
};

// Index-resolved contrastive batch. Positive samples are the same in-batch
// rows as the anchor (synchronous by construction); each negative device has
// one row index per anchor row.
struct ContrastiveBatch {
    std::vector<std::int64_t> batch_time_indices;  // [B] global window indices
    std::vector<std::string> positive_ids;
    std::vector<std::string> negative_ids;
    std::vector<double> negative_weights;             // aligned with negative_ids
    std::vector<std::vector<std::int32_t>> negative_rows;  // per negative device, [B]
};

ContrastiveBatch resolve_contrastive(const std::vector<std::int64_t>& batch_indices,
                                     const selection::SelectionResult& sel, Rng& rng,
                                     NegativeMode mode = NegativeMode::asynchronous);

}  // namespace collossl::sampling
