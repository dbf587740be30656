// Per-batch device selection: pick the positive device (least MMD from the
// anchor batch) and weight every candidate as a negative by inverse MMD,
// normalized so the maximum weight is exactly 1.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "collossl/common.hpp"
#include "collossl/mmd.hpp"

namespace collossl::selection {

enum class Strategy {
    collossl,                 // closest positive, all candidates weighted negatives
    random,                   // one random positive and one random negative
    closest_pos_random_neg,   // closest positive, one random negative
    unweighted,               // as collossl but every weight = 1
};

Strategy strategy_from_string(const std::string& s);
std::string to_string(Strategy s);

// For collossl/unweighted the invariants hold: positive_ids[0] is the argmin
// of mmd_scores (ties broken by candidate order), negative_weights covers
// every candidate including the positive device, max weight == 1, and
// weights order inversely to MMD. Random strategies carry a single drawn
// negative with weight 1 and leave mmd_scores empty (random) or filled
// (closest_pos_random_neg).
struct SelectionResult {
    std::string anchor_id;
    std::vector<std::string> positive_ids;
    std::vector<std::pair<std::string, double>> negative_weights;
    std::vector<std::pair<std::string, double>> mmd_scores;
    double bandwidth_used = 0.0;
};

// MMD below this floor is capped before inversion, so a candidate that
// duplicates the anchor gets weight 1 instead of infinity.
inline constexpr double kMmdFloor = 1e-8;

SelectionResult select_devices(const std::string& anchor_id, const mmd::Matrix& anchor_batch,
                               const std::vector<std::pair<std::string, const mmd::Matrix*>>& candidates,
                               Strategy strategy, Rng& rng,
                               const mmd::KernelSpec& kernel = mmd::KernelSpec::median(),
                               int num_positives = 1);

// Inverse-MMD weights from precomputed scores, max-normalized over all
// candidates; exposed so score fixtures can be checked directly.
std::vector<std::pair<std::string, double>> inverse_mmd_weights(
    const std::vector<std::pair<std::string, double>>& mmd_scores);

}  // namespace collossl::selection
