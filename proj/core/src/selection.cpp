#include "collossl/selection.hpp"

#include <algorithm>

namespace collossl::selection {

Strategy strategy_from_string(const std::string& s) {
    if (s == "collossl") return Strategy::collossl;
    if (s == "random") return Strategy::random;
    if (s == "closest_pos_random_neg") return Strategy::closest_pos_random_neg;
    if (s == "unweighted") return Strategy::unweighted;
    throw ConfigError("unknown selection strategy '" + s +
                      "' (expected collossl|random|closest_pos_random_neg|unweighted)");
}

std::string to_string(Strategy s) {
    switch (s) {
        case Strategy::collossl: return "collossl";
        case Strategy::random: return "random";
        case Strategy::closest_pos_random_neg: return "closest_pos_random_neg";
        case Strategy::unweighted: return "unweighted";
    }
    return "?";
}

std::vector<std::pair<std::string, double>> inverse_mmd_weights(
    const std::vector<std::pair<std::string, double>>& mmd_scores) {
    std::vector<std::pair<std::string, double>> weights;
    weights.reserve(mmd_scores.size());
    double max_w = 0.0;
    for (const auto& [id, score] : mmd_scores) {
        const double w = 1.0 / std::max(score, kMmdFloor);
        weights.push_back({id, w});
        max_w = std::max(max_w, w);
    }
    for (auto& [id, w] : weights) w /= max_w;
    return weights;
}

SelectionResult select_devices(const std::string& anchor_id, const mmd::Matrix& anchor_batch,
                               const std::vector<std::pair<std::string, const mmd::Matrix*>>& candidates,
                               Strategy strategy, Rng& rng, const mmd::KernelSpec& kernel,
                               int num_positives) {
    if (candidates.empty()) throw DataError("select_devices: empty candidate set");
    if (num_positives < 1 || static_cast<size_t>(num_positives) > candidates.size()) {
        throw ConfigError("select_devices: num_positives out of range");
    }

    SelectionResult result;
    result.anchor_id = anchor_id;

    if (strategy == Strategy::random) {
        std::uniform_int_distribution<size_t> pick(0, candidates.size() - 1);
        result.positive_ids.push_back(candidates[pick(rng)].first);
        result.negative_weights.push_back({candidates[pick(rng)].first, 1.0});
        return result;
    }

    auto pairwise = mmd::pairwise_mmd(anchor_batch, candidates, kernel);
    result.mmd_scores = pairwise.scores;
    result.bandwidth_used = pairwise.bandwidth;

    // Closest positives: ascending MMD, candidate order breaks ties.
    std::vector<size_t> by_score(candidates.size());
    for (size_t i = 0; i < by_score.size(); ++i) by_score[i] = i;
    std::stable_sort(by_score.begin(), by_score.end(), [&](size_t a, size_t b) {
        return result.mmd_scores[a].second < result.mmd_scores[b].second;
    });
    for (int p = 0; p < num_positives; ++p) {
        result.positive_ids.push_back(result.mmd_scores[by_score[static_cast<size_t>(p)]].first);
    }

    switch (strategy) {
        case Strategy::collossl:
            result.negative_weights = inverse_mmd_weights(result.mmd_scores);
            break;
        case Strategy::unweighted:
            for (const auto& [id, score] : result.mmd_scores) {
                result.negative_weights.push_back({id, 1.0});
            }
            break;
        case Strategy::closest_pos_random_neg: {
            std::uniform_int_distribution<size_t> pick(0, candidates.size() - 1);
            result.negative_weights.push_back({candidates[pick(rng)].first, 1.0});
            break;
        }
        case Strategy::random:
            break;  // handled above
    }
    return result;
}

}  // namespace collossl::selection
