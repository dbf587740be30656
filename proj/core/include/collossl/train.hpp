// Training orchestration: contrastive pretraining over multiple devices,
// supervised fine-tuning with layer freezing, and the baseline trainers
// (random-frozen head, supervised single/multi, autoencoder single/multi).

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "collossl/dataset.hpp"
#include "collossl/nn.hpp"
#include "collossl/sampling.hpp"
#include "collossl/selection.hpp"

namespace collossl::train {

struct TrainConfig {
    std::string anchor_id;
    // Pretraining anchor override for transfer-to-unseen-device runs: the
    // pretext stage anchors here while fine-tuning/evaluation stay on
    // anchor_id (which is then listed in exclude_devices). Empty = anchor_id.
    std::string pretrain_anchor_id;
    double pretrain_lr = 1e-5;
    double finetune_lr = 1e-3;
    double autoencoder_lr = 1e-3;
    std::int64_t batch_size = 512;
    double temperature = 0.05;
    int max_epochs = 60;
    int patience = 5;
    double plateau_rel_tol = 1e-4;
    selection::Strategy selection_strategy = selection::Strategy::collossl;
    sampling::NegativeMode sampling_mode = sampling::NegativeMode::asynchronous;
    nn::FreezeMode freeze_mode = nn::FreezeMode::finetune_last_conv;
    double label_fraction = 1.0;
    std::uint64_t seed = 1;
    std::vector<std::string> exclude_devices;  // removed from the candidate set
    nn::OptimizerKind optimizer = nn::OptimizerKind::adam;
    int num_positives = 1;
    bool selection_every_batch = true;  // false: reuse the epoch's first selection
    std::int64_t mmd_subsample = 128;   // rows per device for batch MMD; 0 = full batch
    double kernel_bandwidth = 0.0;      // 0 = median heuristic per batch
    nn::ExtractorConfig extractor;
    int head_hidden_units = 1024;
    std::string selection_audit_path;       // per-batch selection trace CSV; empty = off
    std::string abort_checkpoint_path;      // last good state on numerical abort; empty = off

    void validate() const;
};

struct TrainLog {
    std::vector<double> epoch_losses;
    std::int64_t final_step = 0;
    double wall_seconds = 0.0;
    std::string convergence_reason;  // "plateau" | "max_epochs" | "aborted"
};

// ---------------------------------------------------------------------------
// Batch gathering
// ---------------------------------------------------------------------------

template <typename T, typename Source>
nn::MatX<T> gather_windows(const Source& src, int device, const std::vector<std::int64_t>& indices) {
    const auto dim = src.window_size();
    nn::MatX<T> out(static_cast<Eigen::Index>(indices.size()), static_cast<Eigen::Index>(dim));
    for (size_t r = 0; r < indices.size(); ++r) {
        auto w = src.window(device, indices[r]);
        T* dst = out.row(static_cast<Eigen::Index>(r)).data();
        for (std::int64_t c = 0; c < dim; ++c) dst[c] = static_cast<T>(w[static_cast<size_t>(c)]);
    }
    return out;
}

// Eval-mode embeddings for every window of one device, batched.
nn::MatX<float> embed_all(const nn::FeatureExtractor<float>& extractor,
                          const data::MultiDeviceDataset& ds, int device,
                          std::int64_t batch_size = 256);

// ---------------------------------------------------------------------------
// Pipelines
// ---------------------------------------------------------------------------

struct PretrainResult {
    nn::FeatureExtractor<float> extractor;
    TrainLog log;
};

// Contrastive pretraining on a label-stripped view: per batch, select
// devices by MMD, resolve synchronous positives / asynchronous negatives,
// push every role through the one shared extractor and descend the
// multi-view contrastive loss (plus L2 on conv kernels). Stops on loss
// plateau or max_epochs.
PretrainResult pretrain_collossl(const data::UnlabeledView& view, const TrainConfig& cfg);

struct FinetuneResult {
    nn::FeatureExtractor<float> extractor;
    nn::ClassifierHead<float> head;
    TrainLog log;
};

// Supervised fine-tuning on labeled anchor windows with the configured
// freeze partition (default: conv1/conv2 frozen, conv3 + head trainable).
FinetuneResult finetune(const nn::FeatureExtractor<float>& pretrained,
                        const data::LabeledSubset& labeled, const TrainConfig& cfg);

enum class BaselineKind {
    random_frozen,
    supervised_single,
    supervised_multi,
    autoencoder_single,
    autoencoder_multi,
};

BaselineKind baseline_from_string(const std::string& s);
std::string to_string(BaselineKind k);

struct BaselineResult {
    nn::FeatureExtractor<float> extractor;
    nn::ClassifierHead<float> head;
    TrainLog pretrain_log;  // empty for baselines without a pretext stage
    TrainLog finetune_log;
};

BaselineResult train_baseline(BaselineKind kind, const data::MultiDeviceDataset& ds,
                              const data::LabeledSubset& labeled, const TrainConfig& cfg);

struct AutoencoderResult {
    nn::FeatureExtractor<float> extractor;
    nn::Decoder<float> decoder;
    TrainLog log;
};

// Encoder+decoder reconstruction pretraining on the pooled windows of the
// given devices (MSE objective). The decoder is discarded by callers after
// the encoder is extracted.
AutoencoderResult pretrain_autoencoder(const data::UnlabeledView& view,
                                       const std::vector<int>& devices, const TrainConfig& cfg);

}  // namespace collossl::train
