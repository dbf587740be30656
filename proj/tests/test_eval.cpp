#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "collossl/eval.hpp"
#include "test_util.hpp"

using namespace collossl;

namespace {

// Independent confusion-matrix oracle for macro-F1.
double oracle_macro_f1(const std::vector<int>& pred, const std::vector<int>& truth, int k) {
    double total = 0.0;
    for (int c = 0; c < k; ++c) {
        std::int64_t tp = 0, fp = 0, fn = 0;
        for (size_t i = 0; i < truth.size(); ++i) {
            const bool is_c = truth[i] == c;
            const bool said_c = pred[i] == c;
            tp += is_c && said_c;
            fp += !is_c && said_c;
            fn += is_c && !said_c;
        }
        const double precision = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / (tp + fp);
        const double recall = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / (tp + fn);
        total += precision + recall == 0 ? 0.0 : 2 * precision * recall / (precision + recall);
    }
    return total / k;
}

synth::SynthConfig eval_synth() {
    synth::SynthConfig cfg;
    cfg.num_devices = 3;
    cfg.num_classes = 3;
    cfg.num_subjects = 5;
    cfg.windows_per_subject_per_class = 6;
    cfg.sampling_rate_hz = 32.0;
    cfg.window_seconds = 1.5;
    cfg.noise_std = 0.15;
    cfg.seed = 9;
    return cfg;
}

train::TrainConfig quick_train() {
    train::TrainConfig cfg;
    cfg.anchor_id = "dev0";
    cfg.batch_size = 16;
    cfg.max_epochs = 2;
    cfg.seed = 4;
    return cfg;
}

}  // namespace

TEST_CASE("macro-F1 fixtures") {
    CHECK(eval::macro_f1({0, 1, 2, 0}, {0, 1, 2, 0}, 3) == doctest::Approx(1.0));

    // binary confusion TP=1, FP=1, FN=1, TN=1 in both directions
    CHECK(eval::macro_f1({0, 0, 1, 1}, {0, 1, 0, 1}, 2) == doctest::Approx(0.5));

    // all predictions one class over balanced 4-class labels:
    // F1(class0) = 2*(0.25*1)/(1.25) = 0.4, others 0 -> macro = 0.1
    CHECK(eval::macro_f1({0, 0, 0, 0}, {0, 1, 2, 3}, 4) == doctest::Approx(0.1));
}

TEST_CASE("absent classes contribute zero by convention") {
    // class 2 never predicted nor labeled
    const double f1 = eval::macro_f1({0, 1}, {0, 1}, 3);
    CHECK(f1 == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("macro-F1 matches the independent confusion oracle on random pairs") {
    auto gen = testutil::rng(109);
    std::uniform_int_distribution<int> cls(0, 4);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<int> pred(60), truth(60);
        for (int i = 0; i < 60; ++i) {
            pred[static_cast<size_t>(i)] = cls(gen);
            truth[static_cast<size_t>(i)] = cls(gen);
        }
        CHECK(eval::macro_f1(pred, truth, 5) ==
              doctest::Approx(oracle_macro_f1(pred, truth, 5)).epsilon(1e-12));
    }
}

TEST_CASE("report mean/std stay consistent with the fold list") {
    eval::ExperimentReport report;
    report.fold_f1 = {0.5, 0.7, 0.6};
    report.finalize();
    CHECK(report.mean_f1 == doctest::Approx(0.6).epsilon(1e-12));
    double sq = 0;
    for (double v : report.fold_f1) sq += (v - 0.6) * (v - 0.6);
    CHECK(report.std_f1 == doctest::Approx(std::sqrt(sq / 3)).epsilon(1e-12));
}

TEST_CASE("leave-one-group-out produces one fold per group with disjoint subjects") {
    auto ds = synth::generate(eval_synth());
    auto cfg = quick_train();
    eval::CvOptions options;
    options.num_groups = 5;
    auto report = eval::run_logo_cv(ds, eval::Method::random_frozen, cfg, options);
    CHECK(report.fold_f1.size() == 5);
    CHECK(report.method == "random_frozen");
    for (double f1 : report.fold_f1) {
        CHECK(f1 >= 0.0);
        CHECK(f1 <= 1.0);
    }
    CHECK(report.per_class_f1_mean.size() == 3);
}

TEST_CASE("cross-validation is deterministic per seed") {
    auto ds = synth::generate(eval_synth());
    auto cfg = quick_train();
    eval::CvOptions options;
    options.num_groups = 2;
    options.max_folds = 1;
    auto a = eval::run_logo_cv(ds, eval::Method::random_frozen, cfg, options);
    auto b = eval::run_logo_cv(ds, eval::Method::random_frozen, cfg, options);
    CHECK(a.fold_f1 == b.fold_f1);
}

TEST_CASE("parallel fold jobs reproduce the serial report exactly") {
    auto ds = synth::generate(eval_synth());
    auto cfg = quick_train();
    eval::CvOptions serial;
    serial.num_groups = 3;
    auto a = eval::run_logo_cv(ds, eval::Method::random_frozen, cfg, serial);

    eval::CvOptions parallel = serial;
    parallel.parallel_folds = 3;
    auto b = eval::run_logo_cv(ds, eval::Method::random_frozen, cfg, parallel);
    CHECK(a.fold_f1 == b.fold_f1);
    CHECK(a.per_class_f1_mean == b.per_class_f1_mean);
    CHECK(a.mean_f1 == b.mean_f1);
}

TEST_CASE("collossl runs through cross-validation end to end") {
    auto ds = synth::generate(eval_synth());
    auto cfg = quick_train();
    cfg.label_fraction = 0.5;
    eval::CvOptions options;
    options.num_groups = 2;
    options.max_folds = 1;
    auto report = eval::run_logo_cv(ds, eval::Method::collossl, cfg, options);
    CHECK(report.fold_f1.size() == 1);
    CHECK(report.label_fraction == 0.5);
}

TEST_CASE("sweep shape: one row per method, reference marked at fraction 1.0") {
    auto ds = synth::generate(eval_synth());
    auto cfg = quick_train();
    eval::CvOptions options;
    options.num_groups = 2;
    options.max_folds = 1;
    auto sweep = eval::sweep_label_fractions(ds, {eval::Method::random_frozen},
                                             {0.25, 1.0}, cfg, options);
    REQUIRE(sweep.rows.size() == 2);  // reference + random_frozen
    CHECK(sweep.rows[0].method == "supervised_single");
    CHECK(sweep.rows[0].is_reference);
    REQUIRE(sweep.rows[0].cells.size() == 1);
    CHECK(sweep.rows[0].cells[0].fraction == 1.0);
    CHECK(sweep.rows[1].method == "random_frozen");
    CHECK(sweep.rows[1].cells.size() == 2);

    const std::string csv = eval::sweep_to_csv(sweep);
    CHECK(csv.find("supervised_single,1,") != std::string::npos);
}

TEST_CASE("robustness grids prepend the unperturbed level and report deltas") {
    auto synth_cfg = eval_synth();
    synth_cfg.num_subjects = 2;
    auto cfg = quick_train();
    eval::CvOptions options;
    options.num_groups = 2;
    options.max_folds = 1;
    auto report = eval::run_robustness(synth_cfg, synth::PerturbationKind::missing, {0.3},
                                       eval::Method::random_frozen, cfg, options);
    REQUIRE(report.levels.size() == 2);
    CHECK(report.levels[0].level == 0.0);
    CHECK(report.levels[0].delta_vs_baseline == 0.0);
    CHECK(report.levels[1].level == 0.3);
    CHECK(report.kind == "missing");
}

TEST_CASE("misalignment robustness re-segments from raw streams") {
    auto synth_cfg = eval_synth();
    synth_cfg.num_subjects = 2;
    auto cfg = quick_train();
    eval::CvOptions options;
    options.num_groups = 2;
    options.max_folds = 1;
    auto report = eval::run_robustness(synth_cfg, synth::PerturbationKind::misalignment,
                                       {0.25}, eval::Method::random_frozen, cfg, options);
    REQUIRE(report.levels.size() == 2);
    CHECK(report.levels[1].level == 0.25);
}

TEST_CASE("embedding export is deterministic and round-trips as float32") {
    namespace fs = std::filesystem;
    auto ds = data::normalize(synth::generate(eval_synth())).dataset;
    nn::FeatureExtractor<float> extractor;
    extractor.init(77);
    const auto base = (fs::temp_directory_path() / "collossl_emb_test").string();

    eval::export_embeddings(extractor, ds, "dev0", base);
    std::ifstream f32(base + ".f32", std::ios::binary);
    REQUIRE(f32.good());
    std::vector<float> first(static_cast<size_t>(ds.num_windows) * 96);
    f32.read(reinterpret_cast<char*>(first.data()),
             static_cast<std::streamsize>(first.size() * sizeof(float)));
    CHECK(f32.gcount() == static_cast<std::streamsize>(first.size() * sizeof(float)));
    char extra;
    CHECK(!f32.read(&extra, 1));  // row count is exactly T

    eval::export_embeddings(extractor, ds, "dev0", base);
    std::ifstream again(base + ".f32", std::ios::binary);
    std::vector<float> second(first.size());
    again.read(reinterpret_cast<char*>(second.data()),
               static_cast<std::streamsize>(second.size() * sizeof(float)));
    CHECK(first == second);

    std::ifstream labels(base + ".labels.csv");
    std::string header;
    std::getline(labels, header);
    CHECK(header == "window,label,subject");
    int rows = 0;
    std::string line;
    while (std::getline(labels, line)) rows += !line.empty();
    CHECK(rows == ds.num_windows);

    fs::remove(base + ".f32");
    fs::remove(base + ".shape");
    fs::remove(base + ".labels.csv");
}

TEST_CASE("input-gradient export writes one [W, C] gradient per window") {
    namespace fs = std::filesystem;
    auto ds = data::normalize(synth::generate(eval_synth())).dataset;
    nn::FeatureExtractor<float> extractor;
    extractor.init(81);
    nn::ClassifierHead<float> head;
    head.configure(96, 3);
    head.init(82);
    const auto base = (fs::temp_directory_path() / "collossl_grad_test").string();

    eval::export_input_gradients(extractor, head, ds, "dev0", base);
    std::ifstream f32(base + ".f32", std::ios::binary);
    REQUIRE(f32.good());
    std::vector<float> grads(static_cast<size_t>(ds.num_windows * ds.window_size()));
    f32.read(reinterpret_cast<char*>(grads.data()),
             static_cast<std::streamsize>(grads.size() * sizeof(float)));
    CHECK(f32.gcount() == static_cast<std::streamsize>(grads.size() * sizeof(float)));
    char extra;
    CHECK(!f32.read(&extra, 1));
    double norm = 0;
    for (float g : grads) norm += std::abs(g);
    CHECK(norm > 0.0);  // gradients actually flow back to the input
    fs::remove(base + ".f32");
    fs::remove(base + ".shape");
}

TEST_CASE("report serialization carries the key fields") {
    eval::ExperimentReport report;
    report.method = "collossl";
    report.label_fraction = 0.25;
    report.fold_f1 = {0.8, 0.9};
    report.finalize();
    report.config_fingerprint = "deadbeef";
    const std::string csv = eval::report_to_csv(report);
    CHECK(csv.find("method,collossl") != std::string::npos);
    CHECK(csv.find("fold_1_f1,0.9") != std::string::npos);
    const std::string json = eval::report_to_json(report);
    CHECK(json.find("\"mean_f1\"") != std::string::npos);
    CHECK(json.find("deadbeef") != std::string::npos);
}
