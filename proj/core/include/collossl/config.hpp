// Run configuration: flat sectioned key = value files with defaults, flag
// overrides, unknown-key rejection and a stable fingerprint of the
// canonicalized effective config.

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "collossl/common.hpp"
#include "collossl/eval.hpp"
#include "collossl/synth.hpp"
#include "collossl/train.hpp"

namespace collossl::config {

struct KeySpec {
    std::string key;
    std::string default_value;
    std::string doc;
};

// Every recognized key with its default and one-line doc.
const std::vector<KeySpec>& key_registry();

class RunConfig {
public:
    RunConfig();  // all defaults

    // Parses an INI-style file: dotted keys or [section] headers followed by
    // bare keys. Unknown keys throw ConfigError.
    void load_file(const std::string& path);

    // Applies one "section.key=value" override (flags win over the file).
    void set(const std::string& assignment);
    void set(const std::string& key, const std::string& value);

    const std::string& get(const std::string& key) const;
    long long get_int(const std::string& key) const;
    double get_real(const std::string& key) const;
    bool get_bool(const std::string& key) const;
    std::vector<std::string> get_list(const std::string& key) const;  // comma separated
    std::vector<double> get_real_list(const std::string& key) const;

    // Sorted "key = value" lines over the full effective config; identical
    // canonical text on any machine for the same config.
    std::string canonical() const;
    std::string fingerprint() const;  // 16 hex chars of FNV-1a64(canonical)

    train::TrainConfig make_train_config() const;
    synth::SynthConfig make_synth_config() const;
    eval::CvOptions make_cv_options() const;

private:
    std::map<std::string, std::string> values_;
};

}  // namespace collossl::config
