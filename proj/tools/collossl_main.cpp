// Command-line entry point: one binary, one subcommand per pipeline stage.
// Exit codes: 0 ok, 2 invalid config/usage, 3 data error, 4 numerical abort.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "collossl/config.hpp"
#include "collossl/dataset.hpp"
#include "collossl/eval.hpp"
#include "collossl/mmd.hpp"
#include "collossl/plot.hpp"
#include "collossl/synth.hpp"
#include "collossl/train.hpp"

namespace fs = std::filesystem;
using namespace collossl;

namespace {

struct CommonArgs {
    std::string config_path;
    std::vector<std::string> overrides;
    std::optional<long long> seed;
    std::string out_dir;
    bool overwrite = false;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("-c,--config", args.config_path, "config file (key = value, [section] headers)");
    cmd->add_option("-s,--set", args.overrides, "config override section.key=value (repeatable)");
    cmd->add_option("--seed", args.seed, "global seed (overrides run.seed)");
    cmd->add_option("-o,--out", args.out_dir, "output directory");
    cmd->add_flag("--overwrite", args.overwrite, "allow clobbering existing outputs");
}

config::RunConfig build_config(const CommonArgs& args) {
    config::RunConfig rc;
    if (!args.config_path.empty()) rc.load_file(args.config_path);
    for (const auto& assignment : args.overrides) rc.set(assignment);
    if (args.seed) rc.set("run.seed", std::to_string(*args.seed));
    if (!args.out_dir.empty()) rc.set("run.out", args.out_dir);
    if (args.overwrite) rc.set("run.overwrite", "1");
    return rc;
}

fs::path resolve_out_dir(const config::RunConfig& rc, const std::string& command) {
    std::string out = rc.get("run.out");
    if (out.empty()) {
        const char* root = std::getenv("COLLOSSL_OUT");
        out = (fs::path(root ? root : "runs") / (command + "-" + rc.fingerprint())).string();
    }
    const fs::path dir(out);
    if (fs::exists(dir / "run.json") && !rc.get_bool("run.overwrite")) {
        throw ConfigError("output directory '" + out +
                          "' already holds a run; pass --overwrite to replace it");
    }
    fs::create_directories(dir);
    return dir;
}

void write_run_summary(const fs::path& dir, const std::string& command,
                       const config::RunConfig& rc, const std::vector<std::string>& outputs,
                       const nlohmann::json& results, double runtime_seconds) {
    nlohmann::json j;
    j["command"] = command;
    j["fingerprint"] = rc.fingerprint();
    j["seed"] = rc.get_int("run.seed");
    j["config"] = rc.canonical();
    j["outputs"] = outputs;
    j["results"] = results;
    j["runtime_seconds"] = runtime_seconds;
    std::ofstream out(dir / "run.json", std::ios::trunc);
    if (!out) throw DataError("cannot write " + (dir / "run.json").string());
    out << j.dump(2) << "\n";
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
}

std::string trainlog_csv(const train::TrainLog& log) {
    std::string csv = "epoch,loss\n";
    for (size_t e = 0; e < log.epoch_losses.size(); ++e) {
        csv += std::to_string(e) + "," + format_real(log.epoch_losses[e]) + "\n";
    }
    csv += "# final_step=" + std::to_string(log.final_step) +
           " convergence=" + log.convergence_reason +
           " wall_seconds=" + format_real(log.wall_seconds) + "\n";
    return csv;
}

// Dataset resolution shared by most subcommands.
data::MultiDeviceDataset load_input_dataset(const config::RunConfig& rc) {
    const std::string path = rc.get("data.dataset");
    if (path.empty()) return synth::generate(rc.make_synth_config());
    const std::string layout = rc.get("data.layout");
    const double window_seconds = rc.get_real("data.window_seconds");
    if (layout == "realworld") {
        if (!(window_seconds > 0)) {
            throw ConfigError("realworld layout needs data.window_seconds > 0");
        }
        return data::segment_windows(data::load_realworld(path), window_seconds,
                                     rc.get_real("data.overlap"));
    }
    if (layout != "core") throw ConfigError("unknown data.layout '" + layout + "'");
    if (window_seconds > 0) {
        return data::segment_windows(data::load_raw(path), window_seconds,
                                     rc.get_real("data.overlap"));
    }
    return data::load_dataset(path);
}

data::RawRecording load_input_streams(const config::RunConfig& rc) {
    const std::string path = rc.get("data.dataset");
    if (path.empty()) return synth::generate_streams(rc.make_synth_config());
    if (rc.get("data.layout") == "realworld") return data::load_realworld(path);
    return data::load_raw(path);
}

nlohmann::json report_summary(const eval::ExperimentReport& report) {
    return {{"method", report.method},
            {"label_fraction", report.label_fraction},
            {"mean_f1", report.mean_f1},
            {"std_f1", report.std_f1},
            {"folds", report.fold_f1.size()}};
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

int cmd_synth_gen(const CommonArgs& args, bool windowed) {
    auto rc = build_config(args);
    const auto t0 = std::chrono::steady_clock::now();
    const auto dir = resolve_out_dir(rc, "synth-gen");
    auto streams = synth::generate_streams(rc.make_synth_config());
    data::save_raw(streams, dir.string());
    std::vector<std::string> outputs = {"manifest", "data/", "labels.csv"};
    if (windowed) {
        auto ds = data::segment_windows(streams, rc.make_synth_config().window_seconds);
        data::save_dataset(ds, dir.string());
        outputs.push_back("windows/");
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_run_summary(dir, "synth-gen", rc, outputs,
                      {{"devices", rc.get_int("synth.devices")},
                       {"classes", rc.get_int("synth.classes")},
                       {"subjects", rc.get_int("synth.subjects")}},
                      secs);
    std::cout << "wrote synthetic dataset to " << dir << "\n";
    return 0;
}

int cmd_inject(const CommonArgs& args, const std::string& kind, double level) {
    auto rc = build_config(args);
    const auto t0 = std::chrono::steady_clock::now();
    const auto dir = resolve_out_dir(rc, "inject");
    const std::string anchor = rc.get("data.anchor");

    data::MultiDeviceDataset out;
    if (kind == "heterogeneity") {
        synth::PerturbationSpec spec;
        spec.kind = synth::PerturbationKind::heterogeneity;
        spec.sigma_scale = level;
        spec.sigma_bias = level;
        spec.seed = static_cast<std::uint64_t>(rc.get_int("run.seed"));
        out = synth::inject_heterogeneity(load_input_dataset(rc), spec);
    } else if (kind == "missing") {
        synth::PerturbationSpec spec;
        spec.kind = synth::PerturbationKind::missing;
        spec.p_unavailable = level;
        spec.seed = static_cast<std::uint64_t>(rc.get_int("run.seed"));
        out = synth::inject_missing(load_input_dataset(rc), spec, anchor);
    } else if (kind == "misalignment") {
        double window_seconds = rc.get_real("data.window_seconds");
        if (!(window_seconds > 0)) window_seconds = rc.make_synth_config().window_seconds;
        synth::PerturbationSpec spec;
        spec.kind = synth::PerturbationKind::misalignment;
        spec.shift_seconds = level;
        spec.seed = static_cast<std::uint64_t>(rc.get_int("run.seed"));
        out = synth::inject_misalignment(load_input_streams(rc), spec, anchor, window_seconds,
                                         rc.get_real("data.overlap"));
    } else {
        throw ConfigError("unknown perturbation kind '" + kind + "'");
    }
    data::save_dataset(out, dir.string());
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_run_summary(dir, "inject", rc, {"manifest", "windows/"},
                      {{"kind", kind}, {"level", level}, {"windows", out.num_windows}}, secs);
    std::cout << "wrote perturbed dataset (" << kind << " @ " << level << ") to " << dir << "\n";
    return 0;
}

int cmd_mmd_report(const CommonArgs& args) {
    auto rc = build_config(args);
    const auto t0 = std::chrono::steady_clock::now();
    const auto dir = resolve_out_dir(rc, "mmd-report");
    auto ds = load_input_dataset(rc);
    const int anchor = ds.device_index(rc.get("data.anchor"));

    // Evenly strided subset keeps the quadratic kernel sums tractable.
    const std::int64_t cap = std::max<std::int64_t>(rc.get_int("train.batch_size"), 2);
    std::vector<std::int64_t> idx;
    const std::int64_t stride = std::max<std::int64_t>(1, ds.num_windows / cap);
    for (std::int64_t j = 0; j < ds.num_windows && static_cast<std::int64_t>(idx.size()) < cap;
         j += stride) {
        idx.push_back(j);
    }

    const auto anchor_mat = mmd::flatten_windows(ds, anchor, idx);
    std::vector<mmd::Matrix> mats;
    std::vector<std::pair<std::string, const mmd::Matrix*>> candidates;
    mats.reserve(ds.windows.size());
    for (int d = 0; d < ds.num_devices(); ++d) {
        if (d == anchor) continue;
        mats.push_back(mmd::flatten_windows(ds, d, idx));
        candidates.push_back({ds.devices[static_cast<size_t>(d)].device_id, &mats.back()});
    }
    const double bandwidth = rc.get_real("train.kernel_bandwidth");
    auto pairwise = mmd::pairwise_mmd(anchor_mat, candidates,
                                      bandwidth > 0 ? mmd::KernelSpec::rbf(bandwidth)
                                                    : mmd::KernelSpec::median());

    std::string csv = "anchor,device,mmd,bandwidth,n\n";
    for (const auto& [id, value] : pairwise.scores) {
        csv += rc.get("data.anchor") + "," + id + "," + format_real(value) + "," +
               format_real(pairwise.bandwidth) + "," + std::to_string(idx.size()) + "\n";
    }
    write_file(dir / "mmd.csv", csv);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_run_summary(dir, "mmd-report", rc, {"mmd.csv"},
                      {{"devices", pairwise.scores.size()}, {"bandwidth", pairwise.bandwidth}},
                      secs);
    std::cout << csv;
    return 0;
}

int cmd_pretrain(const CommonArgs& args) {
    auto rc = build_config(args);
    const auto t0 = std::chrono::steady_clock::now();
    const auto dir = resolve_out_dir(rc, "pretrain");
    auto ds = load_input_dataset(rc);
    // Standalone pretraining normalizes over the input as a whole; split
    // hygiene is the evaluate/sweep driver's job.
    auto normalized = data::normalize(ds).dataset;
    auto cfg = rc.make_train_config();
    if (rc.get_bool("run.audit")) {
        cfg.selection_audit_path = (dir / "selection_audit.csv").string();
    }
    cfg.abort_checkpoint_path = (dir / "abort.ckpt").string();

    auto result = train::pretrain_collossl(data::unlabeled_view(normalized), cfg);
    auto params = result.extractor.params("ext");
    nn::save_checkpoint((dir / "extractor.ckpt").string(), cfg.extractor.signature(), cfg.seed,
                        result.log.final_step, nn::dump_tensors(params));
    write_file(dir / "trainlog.csv", trainlog_csv(result.log));
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_run_summary(dir, "pretrain", rc, {"extractor.ckpt", "trainlog.csv"},
                      {{"epochs", result.log.epoch_losses.size()},
                       {"final_loss",
                        result.log.epoch_losses.empty() ? 0.0 : result.log.epoch_losses.back()},
                       {"convergence", result.log.convergence_reason}},
                      secs);
    std::cout << "pretrained " << result.log.epoch_losses.size() << " epochs ("
              << result.log.convergence_reason << "); checkpoint at " << dir / "extractor.ckpt"
              << "\n";
    return 0;
}

int cmd_finetune(const CommonArgs& args, const std::string& checkpoint) {
    auto rc = build_config(args);
    const auto t0 = std::chrono::steady_clock::now();
    const auto dir = resolve_out_dir(rc, "finetune");
    auto ds = load_input_dataset(rc);
    auto normalized = data::normalize(ds).dataset;
    auto cfg = rc.make_train_config();

    nn::FeatureExtractor<float> extractor(cfg.extractor);
    auto ckpt = nn::load_checkpoint(checkpoint, cfg.extractor.signature());
    nn::load_tensors(extractor.params("ext"), ckpt);

    auto subset = data::sample_label_fraction(normalized, cfg.anchor_id, cfg.label_fraction,
                                              cfg.seed);
    auto result = train::finetune(extractor, subset, cfg);

    auto params = result.extractor.params("ext");
    auto head_params = result.head.params("head");
    params.insert(params.end(), head_params.begin(), head_params.end());
    nn::save_checkpoint((dir / "model.ckpt").string(),
                        cfg.extractor.signature() + "+head" +
                            std::to_string(result.head.num_classes),
                        cfg.seed, result.log.final_step, nn::dump_tensors(params));
    write_file(dir / "trainlog.csv", trainlog_csv(result.log));
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_run_summary(dir, "finetune", rc, {"model.ckpt", "trainlog.csv"},
                      {{"epochs", result.log.epoch_losses.size()},
                       {"labeled_windows", subset.window_indices.size()}},
                      secs);
    std::cout << "fine-tuned on " << subset.window_indices.size() << " labeled windows; model at "
              << dir / "model.ckpt" << "\n";
    return 0;
}

int cmd_baseline(const CommonArgs& args, const std::string& kind) {
    auto rc = build_config(args);
    const auto t0 = std::chrono::steady_clock::now();
    const auto dir = resolve_out_dir(rc, "baseline");
    auto ds = load_input_dataset(rc);
    auto normalized = data::normalize(ds).dataset;
    auto cfg = rc.make_train_config();

    auto subset = data::sample_label_fraction(normalized, cfg.anchor_id, cfg.label_fraction,
                                              cfg.seed);
    auto result = train::train_baseline(train::baseline_from_string(kind), normalized, subset, cfg);

    auto params = result.extractor.params("ext");
    auto head_params = result.head.params("head");
    params.insert(params.end(), head_params.begin(), head_params.end());
    nn::save_checkpoint((dir / "model.ckpt").string(),
                        cfg.extractor.signature() + "+head" +
                            std::to_string(result.head.num_classes),
                        cfg.seed, result.finetune_log.final_step, nn::dump_tensors(params));
    write_file(dir / "trainlog.csv", trainlog_csv(result.finetune_log));
    if (!result.pretrain_log.epoch_losses.empty()) {
        write_file(dir / "pretrainlog.csv", trainlog_csv(result.pretrain_log));
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_run_summary(dir, "baseline", rc, {"model.ckpt", "trainlog.csv"},
                      {{"kind", kind}, {"epochs", result.finetune_log.epoch_losses.size()}}, secs);
    std::cout << "trained baseline '" << kind << "'; model at " << dir / "model.ckpt" << "\n";
    return 0;
}

int cmd_evaluate(const CommonArgs& args) {
    auto rc = build_config(args);
    const auto t0 = std::chrono::steady_clock::now();
    const auto dir = resolve_out_dir(rc, "evaluate");
    auto ds = load_input_dataset(rc);
    auto cfg = rc.make_train_config();
    auto options = rc.make_cv_options();
    auto report = eval::run_logo_cv(ds, eval::method_from_string(rc.get("eval.method")), cfg,
                                    options);
    write_file(dir / "report.csv", eval::report_to_csv(report));
    write_file(dir / "report.json", eval::report_to_json(report));
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_run_summary(dir, "evaluate", rc, {"report.csv", "report.json"}, report_summary(report),
                      secs);
    std::cout << "method " << report.method << ": mean macro-F1 " << format_real(report.mean_f1)
              << " (std " << format_real(report.std_f1) << ") over " << report.fold_f1.size()
              << " folds\n";
    return 0;
}

int cmd_sweep(const CommonArgs& args) {
    auto rc = build_config(args);
    const auto t0 = std::chrono::steady_clock::now();
    const auto dir = resolve_out_dir(rc, "sweep");
    auto ds = load_input_dataset(rc);
    auto cfg = rc.make_train_config();
    auto options = rc.make_cv_options();
    std::vector<eval::Method> methods;
    for (const auto& name : rc.get_list("eval.methods")) {
        methods.push_back(eval::method_from_string(name));
    }
    auto sweep = eval::sweep_label_fractions(ds, methods, rc.get_real_list("eval.fractions"), cfg,
                                             options);
    write_file(dir / "sweep.csv", eval::sweep_to_csv(sweep));
    write_file(dir / "sweep.json", eval::sweep_to_json(sweep));
    std::vector<std::string> outputs = {"sweep.csv", "sweep.json"};
    if (rc.get_bool("run.plots")) {
        std::vector<plot::Series> series;
        for (const auto& row : sweep.rows) {
            plot::Series s;
            s.name = row.method;
            for (const auto& cell : row.cells) s.points.push_back({cell.fraction, cell.mean_f1});
            series.push_back(std::move(s));
        }
        plot::write_line_plot((dir / "sweep.svg").string(), "macro-F1 vs label fraction",
                              "label fraction", "macro-F1", series);
        outputs.push_back("sweep.svg");
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_run_summary(dir, "sweep", rc, outputs,
                      {{"reference_f1", sweep.reference_f1}, {"rows", sweep.rows.size()}}, secs);
    std::cout << eval::sweep_to_csv(sweep);
    return 0;
}

int cmd_ablate(const CommonArgs& args, const std::string& arm) {
    auto rc = build_config(args);
    if (arm == "synchronous") {
        rc.set("train.sampling", "synchronous");
    } else {
        rc.set("train.strategy", arm);  // collossl|random|closest_pos_random_neg|unweighted
    }
    const auto t0 = std::chrono::steady_clock::now();
    const auto dir = resolve_out_dir(rc, "ablate");
    auto ds = load_input_dataset(rc);
    auto cfg = rc.make_train_config();
    auto options = rc.make_cv_options();
    auto report = eval::run_logo_cv(ds, eval::Method::collossl, cfg, options);
    report.method = "collossl[" + arm + "]";
    write_file(dir / "report.csv", eval::report_to_csv(report));
    write_file(dir / "report.json", eval::report_to_json(report));
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_run_summary(dir, "ablate", rc, {"report.csv", "report.json"}, report_summary(report),
                      secs);
    std::cout << "ablation arm " << arm << ": mean macro-F1 " << format_real(report.mean_f1)
              << "\n";
    return 0;
}

int cmd_robustness(const CommonArgs& args, const std::string& kind,
                   const std::string& levels_csv) {
    auto rc = build_config(args);
    const auto t0 = std::chrono::steady_clock::now();
    const auto dir = resolve_out_dir(rc, "robustness");
    synth::PerturbationKind pk;
    if (kind == "heterogeneity") {
        pk = synth::PerturbationKind::heterogeneity;
    } else if (kind == "missing") {
        pk = synth::PerturbationKind::missing;
    } else if (kind == "misalignment") {
        pk = synth::PerturbationKind::misalignment;
    } else {
        throw ConfigError("unknown robustness kind '" + kind + "'");
    }
    std::vector<double> levels;
    for (const auto& s : split(levels_csv, ',')) {
        if (!trim(s).empty()) levels.push_back(parse_real(trim(s), "--levels"));
    }
    if (levels.empty()) throw ConfigError("robustness: no levels given");

    auto cfg = rc.make_train_config();
    auto options = rc.make_cv_options();
    auto report = eval::run_robustness(rc.make_synth_config(), pk, levels,
                                       eval::method_from_string(rc.get("eval.method")), cfg,
                                       options);
    write_file(dir / "robustness.csv", eval::robustness_to_csv(report));
    write_file(dir / "robustness.json", eval::robustness_to_json(report));
    std::vector<std::string> outputs = {"robustness.csv", "robustness.json"};
    if (rc.get_bool("run.plots")) {
        plot::Series s;
        s.name = report.kind;
        for (const auto& entry : report.levels) {
            s.points.push_back({entry.level, entry.report.mean_f1});
        }
        plot::write_line_plot((dir / "robustness.svg").string(), "macro-F1 vs " + report.kind,
                              report.kind + " level", "macro-F1", {s});
        outputs.push_back("robustness.svg");
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_run_summary(dir, "robustness", rc, outputs,
                      {{"kind", kind}, {"levels", report.levels.size()}}, secs);
    std::cout << eval::robustness_to_csv(report);
    return 0;
}

int cmd_export_embeddings(const CommonArgs& args, const std::string& checkpoint,
                          const std::string& model_checkpoint, const std::string& device) {
    auto rc = build_config(args);
    const auto t0 = std::chrono::steady_clock::now();
    const auto dir = resolve_out_dir(rc, "export-embeddings");
    auto ds = load_input_dataset(rc);
    auto normalized = data::normalize(ds).dataset;
    auto cfg = rc.make_train_config();
    const std::string device_id = device.empty() ? cfg.anchor_id : device;
    std::vector<std::string> outputs = {"embeddings.f32", "embeddings.shape",
                                        "embeddings.labels.csv"};

    nn::FeatureExtractor<float> extractor(cfg.extractor);
    if (!model_checkpoint.empty()) {
        // Full model: embeddings plus per-input gradients of the predicted
        // class logit (saliency input for external tooling).
        auto ckpt = nn::load_checkpoint(model_checkpoint);
        if (ckpt.architecture.rfind(cfg.extractor.signature() + "+head", 0) != 0) {
            throw DataError(model_checkpoint + ": not a classifier checkpoint for architecture " +
                            cfg.extractor.signature());
        }
        const auto classes = static_cast<int>(ckpt.find("head.fc2.bias").shape.at(0));
        nn::ClassifierHead<float> head;
        head.configure(cfg.extractor.embedding_dim(), classes, cfg.head_hidden_units);
        auto params = extractor.params("ext");
        auto head_params = head.params("head");
        params.insert(params.end(), head_params.begin(), head_params.end());
        nn::load_tensors(params, ckpt);
        eval::export_embeddings(extractor, normalized, device_id, (dir / "embeddings").string());
        eval::export_input_gradients(extractor, head, normalized, device_id,
                                     (dir / "input_gradients").string());
        outputs.push_back("input_gradients.f32");
        outputs.push_back("input_gradients.shape");
    } else {
        auto ckpt = nn::load_checkpoint(checkpoint, cfg.extractor.signature());
        nn::load_tensors(extractor.params("ext"), ckpt);
        eval::export_embeddings(extractor, normalized, device_id, (dir / "embeddings").string());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_run_summary(dir, "export-embeddings", rc, outputs,
                      {{"device", device_id}, {"windows", normalized.num_windows}}, secs);
    std::cout << "exported " << normalized.num_windows << " embeddings for device '" << device_id
              << "' to " << dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Collaborative self-supervised learning for multi-device sensor data"};
    app.require_subcommand(1);

    CommonArgs args;
    bool windowed = false;
    std::string kind, arm, checkpoint, model_checkpoint, device, levels_csv;
    double level = 0.0;

    auto* synth_gen = app.add_subcommand("synth-gen", "generate a synthetic multi-device dataset");
    add_common(synth_gen, args);
    synth_gen->add_flag("--windowed", windowed, "also write windowed archives");

    auto* inject = app.add_subcommand("inject", "apply a perturbation to a dataset");
    add_common(inject, args);
    inject->add_option("--kind", kind, "heterogeneity|missing|misalignment")->required();
    inject->add_option("--level", level, "sigma / p_u / shift seconds")->required();

    auto* mmd_report = app.add_subcommand("mmd-report", "pairwise anchor-vs-device MMD table");
    add_common(mmd_report, args);

    auto* pretrain = app.add_subcommand("pretrain", "contrastive pretraining of the extractor");
    add_common(pretrain, args);

    auto* finetune = app.add_subcommand("finetune", "supervised fine-tuning from a checkpoint");
    add_common(finetune, args);
    finetune->add_option("--checkpoint", checkpoint, "extractor checkpoint")->required();

    auto* baseline = app.add_subcommand("baseline", "train a baseline model");
    add_common(baseline, args);
    baseline->add_option("--kind", kind,
                         "random_frozen|supervised_single|supervised_multi|"
                         "autoencoder_single|autoencoder_multi")
        ->required();

    auto* evaluate = app.add_subcommand("evaluate", "leave-one-group-out cross-validation");
    add_common(evaluate, args);

    auto* sweep = app.add_subcommand("sweep", "label-fraction sweep across methods");
    add_common(sweep, args);

    auto* ablate = app.add_subcommand("ablate", "selection/sampling ablation arm");
    add_common(ablate, args);
    ablate->add_option("--strategy", arm,
                       "collossl|random|closest_pos_random_neg|unweighted|synchronous")
        ->required();

    auto* robustness = app.add_subcommand("robustness", "perturbation robustness grid");
    add_common(robustness, args);
    robustness->add_option("--kind", kind, "heterogeneity|missing|misalignment")->required();
    robustness->add_option("--levels,--shifts", levels_csv, "comma-separated levels")->required();

    auto* export_emb = app.add_subcommand("export-embeddings", "write per-window embeddings");
    add_common(export_emb, args);
    export_emb->add_option("--checkpoint", checkpoint, "extractor checkpoint");
    export_emb->add_option("--model", model_checkpoint,
                           "full classifier checkpoint; also writes per-input gradients");
    export_emb->add_option("--device", device, "device id (default: anchor)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (synth_gen->parsed()) return cmd_synth_gen(args, windowed);
        if (inject->parsed()) return cmd_inject(args, kind, level);
        if (mmd_report->parsed()) return cmd_mmd_report(args);
        if (pretrain->parsed()) return cmd_pretrain(args);
        if (finetune->parsed()) return cmd_finetune(args, checkpoint);
        if (baseline->parsed()) return cmd_baseline(args, kind);
        if (evaluate->parsed()) return cmd_evaluate(args);
        if (sweep->parsed()) return cmd_sweep(args);
        if (ablate->parsed()) return cmd_ablate(args, arm);
        if (robustness->parsed()) return cmd_robustness(args, kind, levels_csv);
        if (export_emb->parsed()) {
            if (checkpoint.empty() && model_checkpoint.empty()) {
                throw ConfigError("export-embeddings needs --checkpoint or --model");
            }
            return cmd_export_embeddings(args, checkpoint, model_checkpoint, device);
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
