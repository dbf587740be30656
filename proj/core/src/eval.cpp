#include "collossl/eval.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace collossl::eval {

namespace {
using Clock = std::chrono::steady_clock;
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

std::vector<std::vector<std::int64_t>> confusion_matrix(const std::vector<int>& predictions,
                                                        const std::vector<int>& labels,
                                                        int num_classes) {
    if (predictions.size() != labels.size()) {
        throw DataError("confusion_matrix: prediction/label count mismatch");
    }
    std::vector<std::vector<std::int64_t>> m(
        static_cast<size_t>(num_classes),
        std::vector<std::int64_t>(static_cast<size_t>(num_classes), 0));
    for (size_t i = 0; i < labels.size(); ++i) {
        const int y = labels[i];
        const int p = predictions[i];
        if (y < 0 || y >= num_classes || p < 0 || p >= num_classes) {
            throw DataError("confusion_matrix: class index out of range");
        }
        m[static_cast<size_t>(y)][static_cast<size_t>(p)]++;
    }
    return m;
}

std::vector<double> per_class_f1(const std::vector<std::vector<std::int64_t>>& confusion) {
    const auto k = confusion.size();
    std::vector<double> f1(k, 0.0);
    for (size_t c = 0; c < k; ++c) {
        std::int64_t tp = confusion[c][c];
        std::int64_t fn = 0, fp = 0;
        for (size_t o = 0; o < k; ++o) {
            if (o == c) continue;
            fn += confusion[c][o];
            fp += confusion[o][c];
        }
        const std::int64_t denom = 2 * tp + fp + fn;
        f1[c] = denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
    }
    return f1;
}

double macro_f1(const std::vector<int>& predictions, const std::vector<int>& labels,
                int num_classes) {
    if (num_classes < 1) throw ConfigError("macro_f1: num_classes must be >= 1");
    const auto f1 = per_class_f1(confusion_matrix(predictions, labels, num_classes));
    double sum = 0.0;
    for (double v : f1) sum += v;
    return sum / static_cast<double>(num_classes);
}

// ---------------------------------------------------------------------------
// Methods and reports
// ---------------------------------------------------------------------------

Method method_from_string(const std::string& s) {
    if (s == "collossl") return Method::collossl;
    if (s == "random_frozen") return Method::random_frozen;
    if (s == "supervised_single") return Method::supervised_single;
    if (s == "supervised_multi") return Method::supervised_multi;
    if (s == "autoencoder_single") return Method::autoencoder_single;
    if (s == "autoencoder_multi") return Method::autoencoder_multi;
    throw ConfigError("unknown method '" + s + "'");
}

std::string to_string(Method m) {
    switch (m) {
        case Method::collossl: return "collossl";
        case Method::random_frozen: return "random_frozen";
        case Method::supervised_single: return "supervised_single";
        case Method::supervised_multi: return "supervised_multi";
        case Method::autoencoder_single: return "autoencoder_single";
        case Method::autoencoder_multi: return "autoencoder_multi";
    }
    return "?";
}

void ExperimentReport::finalize() {
    if (fold_f1.empty()) {
        mean_f1 = 0.0;
        std_f1 = 0.0;
        return;
    }
    double sum = 0.0;
    for (double v : fold_f1) sum += v;
    mean_f1 = sum / static_cast<double>(fold_f1.size());
    double sq = 0.0;
    for (double v : fold_f1) sq += (v - mean_f1) * (v - mean_f1);
    std_f1 = std::sqrt(sq / static_cast<double>(fold_f1.size()));
}

std::vector<int> predict(const nn::FeatureExtractor<float>& extractor,
                         const nn::ClassifierHead<float>& head,
                         const data::MultiDeviceDataset& ds, int device) {
    const auto embeddings = train::embed_all(extractor, ds, device);
    nn::ClassifierHead<float>::Ctx ctx;
    const auto probs = head.forward_probs(embeddings, ctx);
    std::vector<int> out(static_cast<size_t>(probs.rows()));
    for (Eigen::Index r = 0; r < probs.rows(); ++r) {
        Eigen::Index best = 0;
        probs.row(r).maxCoeff(&best);
        out[static_cast<size_t>(r)] = static_cast<int>(best);
    }
    return out;
}

namespace {

struct FoldOutcome {
    double f1 = 0.0;
    std::vector<double> class_f1;
};

FoldOutcome run_fold(const data::MultiDeviceDataset& ds, const data::GroupFold& fold, size_t k,
                     Method method, const train::TrainConfig& cfg, const CvOptions& options) {
    const int num_classes = static_cast<int>(ds.class_names.size());
    const std::uint64_t fold_seed = derive_seed(cfg.seed, "fold", k);
    const std::string tag = std::to_string(k);
    auto train_split = data::subset_by_subjects(ds, fold.train_subjects, "train#" + tag);
    auto test_split = data::subset_by_subjects(ds, fold.heldout_subjects, "test#" + tag);

    // Normalization stats come from the training split only.
    auto norm = data::normalize(train_split);
    if (norm.stats.source_tag != "train#" + tag) {
        throw DataError("normalization stats derived from non-training split '" +
                        norm.stats.source_tag + "'");
    }
    auto train_n = std::move(norm.dataset);
    auto test_n = data::normalize(test_split, norm.stats).dataset;
    test_n.split_tag = "test#" + tag;

    if (options.post_norm_transform) {
        train_n = options.post_norm_transform(train_n, derive_seed(fold_seed, "inject_train"));
        test_n = options.post_norm_transform(test_n, derive_seed(fold_seed, "inject_test"));
    }

    train::TrainConfig fold_cfg = cfg;
    fold_cfg.seed = fold_seed;
    auto subset =
        data::sample_label_fraction(train_n, cfg.anchor_id, cfg.label_fraction, fold_seed);

    nn::FeatureExtractor<float> extractor(cfg.extractor);
    nn::ClassifierHead<float> head;
    switch (method) {
        case Method::collossl: {
            auto pre = train::pretrain_collossl(data::unlabeled_view(train_n), fold_cfg);
            auto fit = train::finetune(pre.extractor, subset, fold_cfg);
            extractor = std::move(fit.extractor);
            head = std::move(fit.head);
            break;
        }
        case Method::random_frozen:
        case Method::supervised_single:
        case Method::supervised_multi:
        case Method::autoencoder_single:
        case Method::autoencoder_multi: {
            const auto kind = train::baseline_from_string(to_string(method));
            auto fit = train::train_baseline(kind, train_n, subset, fold_cfg);
            extractor = std::move(fit.extractor);
            head = std::move(fit.head);
            break;
        }
    }

    const int anchor = test_n.device_index(cfg.anchor_id);
    const auto predictions = predict(extractor, head, test_n, anchor);
    FoldOutcome outcome;
    outcome.f1 = macro_f1(predictions, test_n.labels, num_classes);
    outcome.class_f1 = per_class_f1(confusion_matrix(predictions, test_n.labels, num_classes));
    return outcome;
}

}  // namespace

ExperimentReport run_logo_cv(const data::MultiDeviceDataset& ds, Method method,
                             const train::TrainConfig& cfg, const CvOptions& options) {
    cfg.validate();
    if (!ds.has_labels()) throw DataError("cross-validation needs a labeled dataset");
    const int num_classes = static_cast<int>(ds.class_names.size());
    const auto t_start = Clock::now();

    auto folds = data::split_groups(ds, options.num_groups, cfg.seed);
    if (options.max_folds > 0 && static_cast<int>(folds.size()) > options.max_folds) {
        folds.resize(static_cast<size_t>(options.max_folds));
    }

    std::vector<FoldOutcome> outcomes(folds.size());
    const int jobs =
        std::max(1, std::min<int>(options.parallel_folds, static_cast<int>(folds.size())));
    if (jobs == 1) {
        for (size_t k = 0; k < folds.size(); ++k) {
            outcomes[k] = run_fold(ds, folds[k], k, method, cfg, options);
        }
    } else {
        // Independent fold jobs; outcomes merge in fold order below, so the
        // report matches a serial run exactly.
        std::atomic<size_t> next{0};
        std::vector<std::exception_ptr> errors(static_cast<size_t>(jobs));
        std::vector<std::thread> workers;
        for (int w = 0; w < jobs; ++w) {
            workers.emplace_back([&, w]() {
                try {
                    for (size_t k = next.fetch_add(1); k < folds.size(); k = next.fetch_add(1)) {
                        outcomes[k] = run_fold(ds, folds[k], k, method, cfg, options);
                    }
                } catch (...) {
                    errors[static_cast<size_t>(w)] = std::current_exception();
                }
            });
        }
        for (auto& worker : workers) worker.join();
        for (const auto& error : errors) {
            if (error) std::rethrow_exception(error);
        }
    }

    ExperimentReport report;
    report.method = to_string(method);
    report.label_fraction = cfg.label_fraction;
    report.config_fingerprint = options.config_fingerprint;
    std::vector<double> class_f1_sum(static_cast<size_t>(num_classes), 0.0);
    for (const auto& outcome : outcomes) {
        report.fold_f1.push_back(outcome.f1);
        for (size_t c = 0; c < outcome.class_f1.size(); ++c) class_f1_sum[c] += outcome.class_f1[c];
    }
    for (double v : class_f1_sum) {
        report.per_class_f1_mean.push_back(v / static_cast<double>(folds.size()));
    }
    report.finalize();
    report.runtime_seconds =
        std::chrono::duration<double>(Clock::now() - t_start).count();
    return report;
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

SweepReport sweep_label_fractions(const data::MultiDeviceDataset& ds,
                                  const std::vector<Method>& methods,
                                  const std::vector<double>& fractions,
                                  const train::TrainConfig& cfg, const CvOptions& options) {
    if (fractions.empty()) throw ConfigError("sweep: no label fractions given");
    SweepReport sweep;
    sweep.fractions = fractions;

    // Supervised-single is the fixed reference, trained with all labels.
    train::TrainConfig ref_cfg = cfg;
    ref_cfg.label_fraction = 1.0;
    auto ref = run_logo_cv(ds, Method::supervised_single, ref_cfg, options);
    sweep.reference_f1 = ref.mean_f1;
    SweepRow ref_row;
    ref_row.method = to_string(Method::supervised_single);
    ref_row.is_reference = true;
    ref_row.cells.push_back({1.0, ref.mean_f1, ref.std_f1});
    sweep.rows.push_back(std::move(ref_row));

    for (Method m : methods) {
        if (m == Method::supervised_single) continue;
        SweepRow row;
        row.method = to_string(m);
        for (double fraction : fractions) {
            train::TrainConfig run_cfg = cfg;
            run_cfg.label_fraction = fraction;
            auto rep = run_logo_cv(ds, m, run_cfg, options);
            row.cells.push_back({fraction, rep.mean_f1, rep.std_f1});
            if (!row.min_fraction_beating_reference && rep.mean_f1 > sweep.reference_f1) {
                row.min_fraction_beating_reference = fraction;
            }
        }
        sweep.rows.push_back(std::move(row));
    }
    return sweep;
}

// ---------------------------------------------------------------------------
// Robustness
// ---------------------------------------------------------------------------

RobustnessReport run_robustness(const synth::SynthConfig& synth_cfg,
                                synth::PerturbationKind kind, const std::vector<double>& levels,
                                Method method, const train::TrainConfig& cfg,
                                const CvOptions& options) {
    std::vector<double> grid = levels;
    if (std::find(grid.begin(), grid.end(), 0.0) == grid.end()) {
        grid.insert(grid.begin(), 0.0);
    }
    std::sort(grid.begin(), grid.end());

    RobustnessReport report;
    switch (kind) {
        case synth::PerturbationKind::heterogeneity: report.kind = "heterogeneity"; break;
        case synth::PerturbationKind::missing: report.kind = "missing"; break;
        case synth::PerturbationKind::misalignment: report.kind = "misalignment"; break;
    }

    for (size_t li = 0; li < grid.size(); ++li) {
        const double level = grid[li];
        data::MultiDeviceDataset ds;
        CvOptions run_options = options;
        switch (kind) {
            case synth::PerturbationKind::heterogeneity: {
                ds = synth::generate(synth_cfg);
                if (level > 0) {
                    synth::PerturbationSpec spec;
                    spec.kind = synth::PerturbationKind::heterogeneity;
                    spec.sigma_scale = level;
                    spec.sigma_bias = level;
                    spec.seed = derive_seed(cfg.seed, "hetero_level", li);
                    ds = synth::inject_heterogeneity(ds, spec);
                }
                break;
            }
            case synth::PerturbationKind::missing: {
                ds = synth::generate(synth_cfg);
                if (level > 0) {
                    const std::string anchor = cfg.anchor_id;
                    run_options.post_norm_transform =
                        [level, anchor](const data::MultiDeviceDataset& input,
                                        std::uint64_t seed) {
                            synth::PerturbationSpec spec;
                            spec.kind = synth::PerturbationKind::missing;
                            spec.p_unavailable = level;
                            spec.seed = seed;
                            return synth::inject_missing(input, spec, anchor);
                        };
                }
                break;
            }
            case synth::PerturbationKind::misalignment: {
                auto streams = synth::generate_streams(synth_cfg);
                if (level > 0) {
                    synth::PerturbationSpec spec;
                    spec.kind = synth::PerturbationKind::misalignment;
                    spec.shift_seconds = level;
                    spec.seed = derive_seed(cfg.seed, "shift_level", li);
                    ds = synth::inject_misalignment(streams, spec, cfg.anchor_id,
                                                    synth_cfg.window_seconds);
                } else {
                    ds = data::segment_windows(streams, synth_cfg.window_seconds);
                }
                break;
            }
        }

        RobustnessLevel entry;
        entry.level = level;
        entry.report = run_logo_cv(ds, method, cfg, run_options);
        report.levels.push_back(std::move(entry));
    }

    const double baseline = report.levels.front().report.mean_f1;
    for (auto& entry : report.levels) {
        entry.delta_vs_baseline = entry.report.mean_f1 - baseline;
    }
    return report;
}

// ---------------------------------------------------------------------------
// Export
// ---------------------------------------------------------------------------

void export_embeddings(const nn::FeatureExtractor<float>& extractor,
                       const data::MultiDeviceDataset& ds, const std::string& device_id,
                       const std::string& out_path) {
    const int device = ds.device_index(device_id);
    const auto embeddings = train::embed_all(extractor, ds, device);

    std::ofstream out(out_path + ".f32", std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write embeddings: " + out_path + ".f32");
    out.write(reinterpret_cast<const char*>(embeddings.data()),
              static_cast<std::streamsize>(sizeof(float) * static_cast<size_t>(embeddings.size())));
    if (!out) throw DataError("embedding write failed");
    out.close();

    std::ofstream shape(out_path + ".shape", std::ios::trunc);
    shape << "dims = " << embeddings.rows() << " " << embeddings.cols() << " 1\n"
          << "dtype = f32\n"
          << "order = row_major\n";

    std::ofstream labels(out_path + ".labels.csv", std::ios::trunc);
    labels << "window,label,subject\n";
    for (std::int64_t j = 0; j < ds.num_windows; ++j) {
        labels << j << ",";
        if (ds.has_labels()) labels << ds.labels[static_cast<size_t>(j)];
        labels << "," << ds.subject_ids[static_cast<size_t>(j)] << "\n";
    }
}

void export_input_gradients(const nn::FeatureExtractor<float>& extractor,
                            const nn::ClassifierHead<float>& head,
                            const data::MultiDeviceDataset& ds, const std::string& device_id,
                            const std::string& out_path) {
    const int device = ds.device_index(device_id);
    std::ofstream out(out_path + ".f32", std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write input gradients: " + out_path + ".f32");

    // Gradients are per-window, so the extractor's parameter gradients are
    // scratch here; a private copy keeps the caller's model untouched.
    nn::FeatureExtractor<float> scratch_ext = extractor;
    nn::ClassifierHead<float> scratch_head = head;
    Rng dummy(0);
    const std::int64_t batch_size = 128;
    for (std::int64_t start = 0; start < ds.num_windows; start += batch_size) {
        const std::int64_t n = std::min(batch_size, ds.num_windows - start);
        std::vector<std::int64_t> idx(static_cast<size_t>(n));
        for (std::int64_t i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = start + i;
        auto x = train::gather_windows<float>(ds, device, idx);

        nn::FeatureExtractor<float>::Ctx ctx;
        nn::ClassifierHead<float>::Ctx hctx;
        auto emb = scratch_ext.forward(x, ds.window_len, /*train=*/false, dummy, ctx);
        auto probs = scratch_head.forward_probs(emb, hctx);

        nn::MatX<float> dlogits = nn::MatX<float>::Zero(probs.rows(), probs.cols());
        for (Eigen::Index r = 0; r < probs.rows(); ++r) {
            Eigen::Index best = 0;
            probs.row(r).maxCoeff(&best);
            dlogits(r, best) = 1.0f;
        }
        auto demb = scratch_head.backward_from_dlogits(dlogits, hctx);
        auto dx = scratch_ext.backward(demb, ctx);
        out.write(reinterpret_cast<const char*>(dx.data()),
                  static_cast<std::streamsize>(sizeof(float) * static_cast<size_t>(dx.size())));
    }
    if (!out) throw DataError("input gradient write failed");
    out.close();

    std::ofstream shape(out_path + ".shape", std::ios::trunc);
    shape << "dims = " << ds.num_windows << " " << ds.window_len << " " << ds.channels << "\n"
          << "dtype = f32\n"
          << "order = row_major\n";
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

std::string report_to_csv(const ExperimentReport& report) {
    std::ostringstream csv;
    csv << "key,value\n";
    csv << "method," << report.method << "\n";
    csv << "label_fraction," << format_real(report.label_fraction) << "\n";
    csv << "mean_f1," << format_real(report.mean_f1) << "\n";
    csv << "std_f1," << format_real(report.std_f1) << "\n";
    csv << "runtime_seconds," << format_real(report.runtime_seconds) << "\n";
    csv << "config_fingerprint," << report.config_fingerprint << "\n";
    for (size_t k = 0; k < report.fold_f1.size(); ++k) {
        csv << "fold_" << k << "_f1," << format_real(report.fold_f1[k]) << "\n";
    }
    for (size_t c = 0; c < report.per_class_f1_mean.size(); ++c) {
        csv << "class_" << c << "_f1," << format_real(report.per_class_f1_mean[c]) << "\n";
    }
    return csv.str();
}

namespace {

nlohmann::json report_json(const ExperimentReport& report) {
    nlohmann::json j;
    j["method"] = report.method;
    j["label_fraction"] = report.label_fraction;
    j["fold_f1"] = report.fold_f1;
    j["mean_f1"] = report.mean_f1;
    j["std_f1"] = report.std_f1;
    j["per_class_f1_mean"] = report.per_class_f1_mean;
    j["config_fingerprint"] = report.config_fingerprint;
    j["runtime_seconds"] = report.runtime_seconds;
    return j;
}

}  // namespace

std::string report_to_json(const ExperimentReport& report) {
    return report_json(report).dump(2) + "\n";
}

std::string sweep_to_csv(const SweepReport& report) {
    std::ostringstream csv;
    csv << "method,is_reference,fraction,mean_f1,std_f1,min_fraction_beating_reference\n";
    for (const auto& row : report.rows) {
        for (const auto& cell : row.cells) {
            csv << row.method << "," << (row.is_reference ? 1 : 0) << ","
                << format_real(cell.fraction) << "," << format_real(cell.mean_f1) << ","
                << format_real(cell.std_f1) << ",";
            if (row.min_fraction_beating_reference) {
                csv << format_real(*row.min_fraction_beating_reference);
            }
            csv << "\n";
        }
    }
    return csv.str();
}

std::string sweep_to_json(const SweepReport& report) {
    nlohmann::json j;
    j["fractions"] = report.fractions;
    j["reference_f1"] = report.reference_f1;
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : report.rows) {
        nlohmann::json r;
        r["method"] = row.method;
        r["is_reference"] = row.is_reference;
        nlohmann::json cells = nlohmann::json::array();
        for (const auto& cell : row.cells) {
            cells.push_back({{"fraction", cell.fraction},
                             {"mean_f1", cell.mean_f1},
                             {"std_f1", cell.std_f1}});
        }
        r["cells"] = cells;
        if (row.min_fraction_beating_reference) {
            r["min_fraction_beating_reference"] = *row.min_fraction_beating_reference;
        } else {
            r["min_fraction_beating_reference"] = nullptr;
        }
        rows.push_back(r);
    }
    j["rows"] = rows;
    return j.dump(2) + "\n";
}

std::string robustness_to_csv(const RobustnessReport& report) {
    std::ostringstream csv;
    csv << "kind,level,mean_f1,std_f1,delta_vs_baseline\n";
    for (const auto& entry : report.levels) {
        csv << report.kind << "," << format_real(entry.level) << ","
            << format_real(entry.report.mean_f1) << "," << format_real(entry.report.std_f1) << ","
            << format_real(entry.delta_vs_baseline) << "\n";
    }
    return csv.str();
}

std::string robustness_to_json(const RobustnessReport& report) {
    nlohmann::json j;
    j["kind"] = report.kind;
    nlohmann::json levels = nlohmann::json::array();
    for (const auto& entry : report.levels) {
        nlohmann::json e;
        e["level"] = entry.level;
        e["delta_vs_baseline"] = entry.delta_vs_baseline;
        e["report"] = report_json(entry.report);
        levels.push_back(e);
    }
    j["levels"] = levels;
    return j.dump(2) + "\n";
}

}  // namespace collossl::eval
