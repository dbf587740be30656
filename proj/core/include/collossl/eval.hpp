// Metrics, leave-one-group-out cross-validation, label-fraction sweeps,
// robustness grids and embedding export.

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "collossl/dataset.hpp"
#include "collossl/synth.hpp"
#include "collossl/train.hpp"

namespace collossl::eval {

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

// Row = true label, column = predicted label.
std::vector<std::vector<std::int64_t>> confusion_matrix(const std::vector<int>& predictions,
                                                        const std::vector<int>& labels,
                                                        int num_classes);

std::vector<double> per_class_f1(const std::vector<std::vector<std::int64_t>>& confusion);

// Unweighted mean of per-class F1 over all num_classes classes; a class
// absent from both predictions and labels contributes 0 (pessimistic
// convention, which matters for small held-out folds).
double macro_f1(const std::vector<int>& predictions, const std::vector<int>& labels,
                int num_classes);

// ---------------------------------------------------------------------------
// Methods and reports
// ---------------------------------------------------------------------------

enum class Method {
    collossl,
    random_frozen,
    supervised_single,
    supervised_multi,
    autoencoder_single,
    autoencoder_multi,
};

Method method_from_string(const std::string& s);
std::string to_string(Method m);

struct ExperimentReport {
    std::string method;
    double label_fraction = 1.0;
    std::vector<double> fold_f1;
    double mean_f1 = 0.0;
    double std_f1 = 0.0;
    std::vector<double> per_class_f1_mean;  // averaged over folds
    std::string config_fingerprint;
    double runtime_seconds = 0.0;

    void finalize();  // recomputes mean/std from fold_f1
};

struct CvOptions {
    int num_groups = 4;
    int max_folds = 0;  // 0 = all folds; >0 caps the fold count (speed knob)
    // Folds are independent jobs; >1 runs them on worker threads. Results
    // are merged in fold order, so the report is identical to a serial run.
    int parallel_folds = 1;
    std::string config_fingerprint;
    // Applied to train and test splits after normalization (used by the
    // missing-device robustness arm, whose zeros live in normalized space).
    std::function<data::MultiDeviceDataset(const data::MultiDeviceDataset&, std::uint64_t seed)>
        post_norm_transform;
};

// Per fold: normalize on the training split only, pretrain (methods with a
// pretext stage) on label-stripped training data, fine-tune on a stratified
// label fraction of anchor windows, evaluate macro-F1 on the held-out
// anchor windows. Fold seeds derive from (cfg.seed, fold).
ExperimentReport run_logo_cv(const data::MultiDeviceDataset& ds, Method method,
                             const train::TrainConfig& cfg, const CvOptions& options);

// Predictions for every window of one device (eval mode).
std::vector<int> predict(const nn::FeatureExtractor<float>& extractor,
                         const nn::ClassifierHead<float>& head,
                         const data::MultiDeviceDataset& ds, int device);

// ---------------------------------------------------------------------------
// Sweeps and robustness
// ---------------------------------------------------------------------------

struct SweepCell {
    double fraction = 0.0;
    double mean_f1 = 0.0;
    double std_f1 = 0.0;
};

struct SweepRow {
    std::string method;
    bool is_reference = false;  // supervised_single pinned at fraction 1.0
    std::vector<SweepCell> cells;
    // Smallest fraction whose mean F1 beats the reference; unset if none.
    std::optional<double> min_fraction_beating_reference;
};

struct SweepReport {
    std::vector<double> fractions;
    std::vector<SweepRow> rows;
    double reference_f1 = 0.0;
};

// Every method is evaluated at each fraction except supervised_single,
// which serves as the fixed 100%-label reference row.
SweepReport sweep_label_fractions(const data::MultiDeviceDataset& ds,
                                  const std::vector<Method>& methods,
                                  const std::vector<double>& fractions,
                                  const train::TrainConfig& cfg, const CvOptions& options);

struct RobustnessLevel {
    double level = 0.0;  // sigma / p_u / shift seconds (0 = unperturbed)
    ExperimentReport report;
    double delta_vs_baseline = 0.0;
};

struct RobustnessReport {
    std::string kind;
    std::vector<RobustnessLevel> levels;
};

// Regenerates or perturbs the synthetic dataset at every level and runs the
// full pipeline. Heterogeneity perturbs raw values before normalization;
// missing-device zeros are injected after normalization; misalignment
// shifts raw streams before segmentation. Both training and evaluation data
// are perturbed.
RobustnessReport run_robustness(const synth::SynthConfig& synth_cfg,
                                synth::PerturbationKind kind, const std::vector<double>& levels,
                                Method method, const train::TrainConfig& cfg,
                                const CvOptions& options);

// ---------------------------------------------------------------------------
// Export
// ---------------------------------------------------------------------------

// Writes eval-mode embeddings of every window of one device as
// <out_path>.f32 ([T, 96] row-major float32) with a .shape sidecar and a
// .labels.csv (window,label,subject).
void export_embeddings(const nn::FeatureExtractor<float>& extractor,
                       const data::MultiDeviceDataset& ds, const std::string& device_id,
                       const std::string& out_path);

// Per-input gradients for external saliency tooling: for each window, the
// gradient of the predicted class logit with respect to the input, written
// as <out_path>.f32 ([T, W, C] row-major float32) with a .shape sidecar.
void export_input_gradients(const nn::FeatureExtractor<float>& extractor,
                            const nn::ClassifierHead<float>& head,
                            const data::MultiDeviceDataset& ds, const std::string& device_id,
                            const std::string& out_path);

// ---------------------------------------------------------------------------
// Report serialization
// ---------------------------------------------------------------------------

std::string report_to_csv(const ExperimentReport& report);
std::string report_to_json(const ExperimentReport& report);
std::string sweep_to_csv(const SweepReport& report);
std::string sweep_to_json(const SweepReport& report);
std::string robustness_to_csv(const RobustnessReport& report);
std::string robustness_to_json(const RobustnessReport& report);

}  // namespace collossl::eval
