#include "collossl/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace collossl::config {

const std::vector<KeySpec>& key_registry() {
    static const std::vector<KeySpec> registry = {
        {"data.dataset", "", "dataset root directory; empty = generate synthetic data"},
        {"data.layout", "core", "on-disk layout: core|realworld"},
        {"data.anchor", "dev0", "anchor device id"},
        {"data.window_seconds", "0", "window length for raw CSV ingestion; 0 = use windows/"},
        {"data.overlap", "0", "window overlap fraction for raw ingestion"},

        {"synth.devices", "5", "synthetic generator: device count"},
        {"synth.classes", "6", "synthetic generator: class count"},
        {"synth.subjects", "8", "synthetic generator: subject count"},
        {"synth.windows_per_subject_per_class", "43", "synthetic generator: bout length"},
        {"synth.rate_hz", "32", "synthetic generator: sampling rate"},
        {"synth.window_seconds", "1.5", "synthetic generator: window length"},
        {"synth.spread", "0.6", "synthetic generator: device view divergence"},
        {"synth.noise_std", "0.35", "synthetic generator: additive noise sigma"},

        {"train.pretrain_lr", "1e-5", "contrastive pretraining learning rate"},
        {"train.finetune_lr", "1e-3", "fine-tuning / supervised learning rate"},
        {"train.autoencoder_lr", "1e-3", "autoencoder pretraining learning rate"},
        {"train.batch_size", "512", "training batch size"},
        {"train.temperature", "0.05", "contrastive temperature tau"},
        {"train.max_epochs", "60", "epoch cap"},
        {"train.patience", "5", "plateau patience (epochs)"},
        {"train.plateau_rel_tol", "1e-4", "relative improvement below which an epoch stalls"},
        {"train.strategy", "collossl",
         "device selection: collossl|random|closest_pos_random_neg|unweighted"},
        {"train.sampling", "asynchronous", "negative sampling: asynchronous|synchronous"},
        {"train.freeze", "finetune_last_conv",
         "fine-tune freeze mode: finetune_last_conv|all_trainable|head_only"},
        {"train.label_fraction", "1.0", "fraction of labeled windows used for fine-tuning"},
        {"train.optimizer", "adam", "optimizer: adam|sgd"},
        {"train.num_positives", "1", "positive devices per batch"},
        {"train.selection_every_batch", "1", "recompute device selection every batch (0: per epoch)"},
        {"train.mmd_subsample", "128", "rows per device for batch MMD; 0 = full batch"},
        {"train.kernel_bandwidth", "0", "fixed RBF bandwidth; 0 = median heuristic"},
        {"train.exclude_devices", "", "comma list of devices excluded from pretraining candidates"},
        {"train.pretrain_anchor", "", "pretraining anchor override (transfer-to-unseen runs); "
                                      "empty = data.anchor"},
        {"train.head_hidden", "1024", "classifier head hidden units"},

        {"eval.num_groups", "4", "leave-one-group-out: group count"},
        {"eval.max_folds", "0", "cap on evaluated folds; 0 = all"},
        {"eval.parallel_folds", "1", "fold jobs run on worker threads; 1 = serial"},
        {"eval.method", "collossl", "method for evaluate: collossl|random_frozen|supervised_single|"
                                    "supervised_multi|autoencoder_single|autoencoder_multi"},
        {"eval.fractions", "0.1,0.25,0.5,0.75,1.0", "label fractions for sweep"},
        {"eval.methods", "collossl,random_frozen,supervised_multi,autoencoder_single,"
                         "autoencoder_multi", "methods for sweep (supervised_single is reference)"},

        {"run.seed", "1", "global seed"},
        {"run.out", "", "output directory; empty = $COLLOSSL_OUT/<command>-<fingerprint>"},
        {"run.overwrite", "0", "allow clobbering existing outputs"},
        {"run.audit", "0", "write per-batch selection audit CSV during pretraining"},
        {"run.plots", "1", "write SVG plots for sweep/robustness reports"},
    };
    return registry;
}

RunConfig::RunConfig() {
    for (const auto& spec : key_registry()) values_[spec.key] = spec.default_value;
}

void RunConfig::set(const std::string& key, const std::string& value) {
    if (!values_.count(key)) {
        throw ConfigError("unknown config key '" + key + "'");
    }
    values_[key] = value;
}

void RunConfig::set(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) {
        throw ConfigError("override '" + assignment + "' is not key=value");
    }
    set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void RunConfig::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::string line;
    std::string section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string s = trim(line);
        if (s.empty() || s[0] == '#' || s[0] == ';') continue;
        if (s.front() == '[' && s.back() == ']') {
            section = trim(s.substr(1, s.size() - 2));
            continue;
        }
        const auto eq = s.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(path + ":" + std::to_string(line_no) + ": expected key = value");
        }
        std::string key = trim(s.substr(0, eq));
        if (key.find('.') == std::string::npos && !section.empty()) {
            key = section + "." + key;
        }
        try {
            set(key, trim(s.substr(eq + 1)));
        } catch (const ConfigError& e) {
            throw ConfigError(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
}

const std::string& RunConfig::get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
    return it->second;
}

long long RunConfig::get_int(const std::string& key) const {
    try {
        return parse_int(get(key), "config key " + key);
    } catch (const DataError& e) {
        throw ConfigError(e.what());
    }
}

double RunConfig::get_real(const std::string& key) const {
    try {
        return parse_real(get(key), "config key " + key);
    } catch (const DataError& e) {
        throw ConfigError(e.what());
    }
}

bool RunConfig::get_bool(const std::string& key) const {
    const std::string& v = get(key);
    if (v == "1" || v == "true" || v == "yes") return true;
    if (v == "0" || v == "false" || v == "no") return false;
    throw ConfigError("config key " + key + ": expected boolean, got '" + v + "'");
}

std::vector<std::string> RunConfig::get_list(const std::string& key) const {
    const std::string& v = get(key);
    if (trim(v).empty()) return {};
    std::vector<std::string> out;
    for (auto& part : split(v, ',')) {
        const std::string t = trim(part);
        if (!t.empty()) out.push_back(t);
    }
    return out;
}

std::vector<double> RunConfig::get_real_list(const std::string& key) const {
    std::vector<double> out;
    for (const auto& s : get_list(key)) out.push_back(parse_real(s, "config key " + key));
    return out;
}

std::string RunConfig::canonical() const {
    std::ostringstream text;
    for (const auto& [key, value] : values_) {
        text << key << " = " << value << "\n";
    }
    return text.str();
}

std::string RunConfig::fingerprint() const {
    const std::uint64_t h = fnv1a64(canonical());
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

train::TrainConfig RunConfig::make_train_config() const {
    train::TrainConfig cfg;
    cfg.anchor_id = get("data.anchor");
    cfg.pretrain_lr = get_real("train.pretrain_lr");
    cfg.finetune_lr = get_real("train.finetune_lr");
    cfg.autoencoder_lr = get_real("train.autoencoder_lr");
    cfg.batch_size = get_int("train.batch_size");
    cfg.temperature = get_real("train.temperature");
    cfg.max_epochs = static_cast<int>(get_int("train.max_epochs"));
    cfg.patience = static_cast<int>(get_int("train.patience"));
    cfg.plateau_rel_tol = get_real("train.plateau_rel_tol");
    cfg.selection_strategy = selection::strategy_from_string(get("train.strategy"));
    cfg.sampling_mode = sampling::negative_mode_from_string(get("train.sampling"));
    cfg.freeze_mode = nn::freeze_mode_from_string(get("train.freeze"));
    cfg.label_fraction = get_real("train.label_fraction");
    cfg.seed = static_cast<std::uint64_t>(get_int("run.seed"));
    cfg.exclude_devices = get_list("train.exclude_devices");
    cfg.pretrain_anchor_id = get("train.pretrain_anchor");
    cfg.optimizer = nn::optimizer_from_string(get("train.optimizer"));
    cfg.num_positives = static_cast<int>(get_int("train.num_positives"));
    cfg.selection_every_batch = get_bool("train.selection_every_batch");
    cfg.mmd_subsample = get_int("train.mmd_subsample");
    cfg.kernel_bandwidth = get_real("train.kernel_bandwidth");
    cfg.head_hidden_units = static_cast<int>(get_int("train.head_hidden"));
    cfg.validate();
    return cfg;
}

synth::SynthConfig RunConfig::make_synth_config() const {
    synth::SynthConfig cfg;
    cfg.num_devices = static_cast<int>(get_int("synth.devices"));
    cfg.num_classes = static_cast<int>(get_int("synth.classes"));
    cfg.num_subjects = static_cast<int>(get_int("synth.subjects"));
    cfg.windows_per_subject_per_class =
        static_cast<int>(get_int("synth.windows_per_subject_per_class"));
    cfg.sampling_rate_hz = get_real("synth.rate_hz");
    cfg.window_seconds = get_real("synth.window_seconds");
    cfg.device_transform_spread = get_real("synth.spread");
    cfg.noise_std = get_real("synth.noise_std");
    cfg.seed = static_cast<std::uint64_t>(get_int("run.seed"));
    cfg.validate();
    return cfg;
}

eval::CvOptions RunConfig::make_cv_options() const {
    eval::CvOptions options;
    options.num_groups = static_cast<int>(get_int("eval.num_groups"));
    options.max_folds = static_cast<int>(get_int("eval.max_folds"));
    options.parallel_folds = static_cast<int>(get_int("eval.parallel_folds"));
    options.config_fingerprint = fingerprint();
    return options;
}

}  // namespace collossl::config
