#include "collossl/loss.hpp"

#include <algorithm>

namespace collossl::loss {

double multiview_contrastive_loss(const MclInputs& inputs) {
    if (inputs.positives.empty()) {
        throw ConfigError("multi-view contrastive loss needs >= 1 positive");
    }
    if (inputs.negatives.size() != inputs.weights.size()) {
        throw ConfigError("multi-view contrastive loss: negatives and weights differ in length");
    }
    if (!(inputs.temperature > 0)) throw ConfigError("temperature must be positive");
    const auto dim = static_cast<std::int64_t>(inputs.anchor.size());
    for (const auto& p : inputs.positives) {
        if (static_cast<std::int64_t>(p.size()) != dim) {
            throw DataError("positive embedding dimension mismatch");
        }
    }
    for (const auto& n : inputs.negatives) {
        if (static_cast<std::int64_t>(n.size()) != dim) {
            throw DataError("negative embedding dimension mismatch");
        }
    }

    bool warned = false;
    std::vector<double> logits;
    logits.reserve(inputs.positives.size() + inputs.negatives.size());
    for (const auto& p : inputs.positives) {
        logits.push_back(cosine_sim(inputs.anchor.data(), p.data(), dim, &warned) /
                         inputs.temperature);
    }
    for (const auto& n : inputs.negatives) {
        logits.push_back(cosine_sim(inputs.anchor.data(), n.data(), dim, &warned) /
                         inputs.temperature);
    }
    const double max_logit = *std::max_element(logits.begin(), logits.end());

    double pos_sum = 0.0;
    for (size_t i = 0; i < inputs.positives.size(); ++i) {
        pos_sum += std::exp(logits[i] - max_logit);
    }
    double neg_sum = 0.0;
    for (size_t j = 0; j < inputs.negatives.size(); ++j) {
        neg_sum += inputs.weights[j] * std::exp(logits[inputs.positives.size() + j] - max_logit);
    }
    return std::log(pos_sum + neg_sum) - std::log(pos_sum);
}

}  // namespace collossl::loss
