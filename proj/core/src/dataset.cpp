#include "collossl/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

namespace fs = std::filesystem;

namespace collossl::data {

namespace {

constexpr const char* kImuHeader = "timestamp,ax,ay,az,gx,gy,gz";

std::vector<std::string> read_lines(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open file: " + path.string());
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    return lines;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw DataError("cannot write file: " + path.string());
    out << text;
    if (!out) throw DataError("write failed: " + path.string());
}

// manifest is flat "key = value" text; unknown keys are rejected on load.
std::map<std::string, std::string> parse_kv(const std::vector<std::string>& lines,
                                            const std::string& context) {
    std::map<std::string, std::string> kv;
    for (size_t i = 0; i < lines.size(); ++i) {
        std::string s = trim(lines[i]);
        if (s.empty() || s[0] == '#') continue;
        size_t eq = s.find('=');
        if (eq == std::string::npos) {
            throw DataError(context + ": line " + std::to_string(i + 1) + " is not 'key = value'");
        }
        kv[trim(s.substr(0, eq))] = trim(s.substr(eq + 1));
    }
    return kv;
}

std::string join(const std::vector<std::string>& parts, char sep) {
    std::string out;
    for (size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

}  // namespace

int MultiDeviceDataset::device_index(const std::string& device_id) const {
    for (size_t i = 0; i < devices.size(); ++i) {
        if (devices[i].device_id == device_id) return static_cast<int>(i);
    }
    throw DataError("unknown device '" + device_id + "' in dataset '" + name + "'");
}

int UnlabeledView::device_index(const std::string& device_id) const {
    for (size_t i = 0; i < devices->size(); ++i) {
        if ((*devices)[i].device_id == device_id) return static_cast<int>(i);
    }
    throw DataError("unknown device '" + device_id + "'");
}

UnlabeledView unlabeled_view(const MultiDeviceDataset& ds) {
    UnlabeledView v;
    v.devices = &ds.devices;
    v.num_windows = ds.num_windows;
    v.window_len = ds.window_len;
    v.channels = ds.channels;
    v.windows = &ds.windows;
    return v;
}

void MultiDeviceDataset::validate() const {
    if (devices.empty()) throw DataError("dataset has no devices");
    if (windows.size() != devices.size()) {
        throw DataError("window array count != device count");
    }
    std::set<std::string> seen;
    for (const auto& d : devices) {
        if (!seen.insert(d.device_id).second) {
            throw DataError("duplicate device id '" + d.device_id + "'");
        }
        if (!(d.sampling_rate_hz > 0)) {
            throw DataError("device '" + d.device_id + "' has non-positive sampling rate");
        }
    }
    const auto expect = static_cast<size_t>(num_windows * window_len * channels);
    for (size_t i = 0; i < windows.size(); ++i) {
        if (windows[i].size() != expect) {
            throw DataError("device '" + devices[i].device_id + "' has " +
                            std::to_string(windows[i].size()) + " values, expected " +
                            std::to_string(expect));
        }
        for (float v : windows[i]) {
            if (!std::isfinite(v)) {
                throw DataError("non-finite sample value on device '" + devices[i].device_id + "'");
            }
        }
    }
    if (!labels.empty()) {
        if (static_cast<std::int64_t>(labels.size()) != num_windows) {
            throw DataError("label count != window count");
        }
        const int num_classes = static_cast<int>(class_names.size());
        for (int y : labels) {
            if (y < 0 || (num_classes > 0 && y >= num_classes)) {
                throw DataError("label " + std::to_string(y) + " out of range [0, " +
                                std::to_string(num_classes) + ")");
            }
        }
    }
    if (static_cast<std::int64_t>(subject_ids.size()) != num_windows) {
        throw DataError("subject id count != window count");
    }
}

// ---------------------------------------------------------------------------
// Segmentation
// ---------------------------------------------------------------------------

MultiDeviceDataset segment_windows(const RawRecording& rec, double window_seconds,
                                   double overlap) {
    if (rec.streams.empty()) throw DataError("recording has no streams");
    if (!(overlap >= 0.0 && overlap < 1.0)) throw ConfigError("overlap must be in [0, 1)");
    if (!(window_seconds > 0)) throw ConfigError("window_seconds must be positive");

    const double rate = rec.streams[0].device.sampling_rate_hz;
    const std::int64_t channels = rec.streams[0].channels;
    for (const auto& s : rec.streams) {
        if (std::abs(s.device.sampling_rate_hz - rate) > 1e-9 * std::max(1.0, rate)) {
            throw DataError("device '" + s.device.device_id +
                            "' sampling rate differs; resample before segmentation");
        }
        if (s.channels != channels) {
            throw DataError("device '" + s.device.device_id + "' channel count differs");
        }
    }

    const double wf = window_seconds * rate;
    const auto window_len = static_cast<std::int64_t>(std::llround(wf));
    if (window_len < 1 || std::abs(wf - static_cast<double>(window_len)) > 1e-6) {
        throw ConfigError("window_seconds * rate = " + format_real(wf) +
                          " is not an integer sample count");
    }
    const double sf = static_cast<double>(window_len) * (1.0 - overlap);
    const auto step = static_cast<std::int64_t>(std::llround(sf));
    if (step < 1 || std::abs(sf - static_cast<double>(step)) > 1e-6) {
        throw ConfigError("window step from overlap " + format_real(overlap) +
                          " is not an integer sample count");
    }

    const double period = 1.0 / rate;
    std::int64_t min_n = rec.streams[0].num_samples();
    std::int64_t max_n = min_n;
    for (const auto& s : rec.streams) {
        if (s.num_samples() < 2) {
            throw DataError("device '" + s.device.device_id + "' stream too short");
        }
        // Gap / monotonicity check: anything beyond ~1 sample period of slack
        // means the stream lost samples.
        for (std::int64_t k = 0; k + 1 < s.num_samples(); ++k) {
            const double dt = s.timestamps[k + 1] - s.timestamps[k];
            if (dt <= 0 || dt > 1.5 * period) {
                throw DataError("device '" + s.device.device_id + "': timestamp gap of " +
                                format_real(dt) + " s at sample " + std::to_string(k));
            }
        }
        if (std::abs(s.timestamps[0] - rec.streams[0].timestamps[0]) > 0.5 * period) {
            throw DataError("device '" + s.device.device_id +
                            "' does not start time-aligned with device '" +
                            rec.streams[0].device.device_id + "'");
        }
        min_n = std::min(min_n, s.num_samples());
        max_n = std::max(max_n, s.num_samples());
    }
    if (max_n - min_n > window_len) {
        throw DataError("stream lengths differ by " + std::to_string(max_n - min_n) +
                        " samples (more than one window); streams are misaligned");
    }
    if (min_n < window_len) throw DataError("streams shorter than one window");

    const std::int64_t total_windows = (min_n - window_len) / step + 1;

    // Window labels by majority vote over the label samples in the window's
    // time span; ties drop the window on all devices.
    std::vector<int> labels;
    std::vector<int> subjects;
    std::vector<char> keep(static_cast<size_t>(total_windows), 1);
    const bool labeled = rec.labels.has_value() && !rec.labels->timestamps.empty();
    if (labeled) {
        const auto& track = *rec.labels;
        labels.assign(total_windows, -1);
        subjects.assign(total_windows, 0);
        const double t0 = rec.streams[0].timestamps[0];
        const double eps = 0.25 * period;
        for (std::int64_t j = 0; j < total_windows; ++j) {
            const double start = t0 + static_cast<double>(j * step) * period;
            const double end = start + static_cast<double>(window_len) * period;
            auto lo = std::lower_bound(track.timestamps.begin(), track.timestamps.end(), start - eps);
            auto hi = std::lower_bound(track.timestamps.begin(), track.timestamps.end(), end - eps);
            std::map<int, int> label_votes;
            std::map<int, int> subject_votes;
            for (auto it = lo; it != hi; ++it) {
                const auto idx = static_cast<size_t>(it - track.timestamps.begin());
                label_votes[track.labels[idx]]++;
                subject_votes[track.subjects[idx]]++;
            }
            int best = -1, best_count = 0;
            bool tie = label_votes.empty();
            for (auto [y, c] : label_votes) {
                if (c > best_count) {
                    best = y;
                    best_count = c;
                    tie = false;
                } else if (c == best_count) {
                    tie = true;
                }
            }
            if (tie) {
                keep[j] = 0;
                continue;
            }
            labels[j] = best;
            int best_subj = 0, best_subj_count = -1;
            for (auto [s, c] : subject_votes) {
                if (c > best_subj_count) {
                    best_subj = s;
                    best_subj_count = c;
                }
            }
            subjects[j] = best_subj;
        }
    }

    MultiDeviceDataset ds;
    ds.name = rec.name;
    ds.window_len = window_len;
    ds.channels = channels;
    ds.class_names = rec.class_names;

    std::vector<std::int64_t> kept;
    for (std::int64_t j = 0; j < total_windows; ++j) {
        if (keep[j]) kept.push_back(j);
    }
    ds.num_windows = static_cast<std::int64_t>(kept.size());

    for (const auto& s : rec.streams) {
        ds.devices.push_back(s.device);
        std::vector<float> w(static_cast<size_t>(ds.num_windows * window_len * channels));
        for (std::int64_t out = 0; out < ds.num_windows; ++out) {
            const std::int64_t j = kept[out];
            std::memcpy(w.data() + out * window_len * channels,
                        s.values.data() + j * step * channels,
                        static_cast<size_t>(window_len * channels) * sizeof(float));
        }
        ds.windows.push_back(std::move(w));
    }
    if (labeled) {
        for (std::int64_t j : kept) {
            ds.labels.push_back(labels[j]);
            ds.subject_ids.push_back(subjects[j]);
        }
        if (ds.class_names.empty()) {
            int max_label = -1;
            for (int y : ds.labels) max_label = std::max(max_label, y);
            for (int c = 0; c <= max_label; ++c) ds.class_names.push_back("class_" + std::to_string(c));
        }
    } else {
        ds.subject_ids.assign(static_cast<size_t>(ds.num_windows), 0);
    }
    ds.validate();
    return ds;
}

// ---------------------------------------------------------------------------
// Normalization
// ---------------------------------------------------------------------------

NormalizeResult normalize(const MultiDeviceDataset& ds, const std::optional<NormStats>& stats_in) {
    NormStats stats;
    if (stats_in) {
        stats = *stats_in;
        if (stats.channel_min.size() != ds.devices.size()) {
            throw DataError("normalization stats device count mismatch");
        }
        for (const auto& mins : stats.channel_min) {
            if (static_cast<std::int64_t>(mins.size()) != ds.channels) {
                throw DataError("normalization stats channel count mismatch");
            }
        }
    } else {
        stats.source_tag = ds.split_tag;
        stats.channel_min.assign(ds.devices.size(),
                                 std::vector<float>(static_cast<size_t>(ds.channels),
                                                    std::numeric_limits<float>::max()));
        stats.channel_max.assign(ds.devices.size(),
                                 std::vector<float>(static_cast<size_t>(ds.channels),
                                                    std::numeric_limits<float>::lowest()));
        for (size_t d = 0; d < ds.windows.size(); ++d) {
            const auto& w = ds.windows[d];
            for (size_t i = 0; i < w.size(); ++i) {
                const auto c = static_cast<size_t>(i % ds.channels);
                stats.channel_min[d][c] = std::min(stats.channel_min[d][c], w[i]);
                stats.channel_max[d][c] = std::max(stats.channel_max[d][c], w[i]);
            }
        }
    }

    NormalizeResult out{ds, stats};
    out.dataset.normalized = true;
    for (size_t d = 0; d < ds.windows.size(); ++d) {
        auto& w = out.dataset.windows[d];
        for (std::int64_t c = 0; c < ds.channels; ++c) {
            const float lo = stats.channel_min[d][static_cast<size_t>(c)];
            const float hi = stats.channel_max[d][static_cast<size_t>(c)];
            if (hi <= lo) {
                std::cerr << "warning: device '" << ds.devices[d].device_id << "' channel " << c
                          << " has zero range; normalizing to 0\n";
                for (size_t i = static_cast<size_t>(c); i < w.size();
                     i += static_cast<size_t>(ds.channels)) {
                    w[i] = 0.0f;
                }
                continue;
            }
            const float scale = 2.0f / (hi - lo);
            for (size_t i = static_cast<size_t>(c); i < w.size();
                 i += static_cast<size_t>(ds.channels)) {
                w[i] = (w[i] - lo) * scale - 1.0f;
            }
        }
    }
    return out;
}

MultiDeviceDataset denormalize(const MultiDeviceDataset& ds, const NormStats& stats) {
    MultiDeviceDataset out = ds;
    out.normalized = false;
    for (size_t d = 0; d < ds.windows.size(); ++d) {
        auto& w = out.windows[d];
        for (std::int64_t c = 0; c < ds.channels; ++c) {
            const float lo = stats.channel_min[d][static_cast<size_t>(c)];
            const float hi = stats.channel_max[d][static_cast<size_t>(c)];
            if (hi <= lo) {
                for (size_t i = static_cast<size_t>(c); i < w.size();
                     i += static_cast<size_t>(ds.channels)) {
                    w[i] = lo;
                }
                continue;
            }
            const float scale = (hi - lo) / 2.0f;
            for (size_t i = static_cast<size_t>(c); i < w.size();
                 i += static_cast<size_t>(ds.channels)) {
                w[i] = (w[i] + 1.0f) * scale + lo;
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// On-disk layout
// ---------------------------------------------------------------------------

namespace {

std::string manifest_text(const std::string& name, std::int64_t channels, double rate,
                          const std::vector<std::string>& class_names,
                          const std::vector<DeviceDescriptor>& devices, bool normalized,
                          const std::string& split_tag) {
    std::ostringstream m;
    m << "name = " << name << "\n";
    m << "channels = " << channels << "\n";
    m << "sampling_rate_hz = " << format_real(rate) << "\n";
    m << "classes = " << join(class_names, ',') << "\n";
    std::vector<std::string> devs;
    devs.reserve(devices.size());
    for (const auto& d : devices) devs.push_back(d.device_id + ":" + d.position_label);
    m << "devices = " << join(devs, ',') << "\n";
    m << "normalized = " << (normalized ? 1 : 0) << "\n";
    m << "split = " << split_tag << "\n";
    return m.str();
}

struct ManifestFields {
    std::string name;
    std::int64_t channels = 0;
    double rate = 0;
    std::vector<std::string> class_names;
    std::vector<DeviceDescriptor> devices;
    bool normalized = false;
    std::string split_tag = "full";
};

ManifestFields load_manifest(const fs::path& root) {
    const fs::path path = root / "manifest";
    if (!fs::exists(path)) throw DataError("missing manifest: " + path.string());
    auto kv = parse_kv(read_lines(path), path.string());
    static const std::set<std::string> known = {"name",    "channels",   "sampling_rate_hz",
                                                "classes", "devices",    "normalized",
                                                "split"};
    for (const auto& [k, _] : kv) {
        if (!known.count(k)) throw DataError("manifest: unknown key '" + k + "'");
    }
    ManifestFields f;
    f.name = kv.count("name") ? kv["name"] : "dataset";
    f.channels = parse_int(kv.at("channels"), "manifest channels");
    f.rate = parse_real(kv.at("sampling_rate_hz"), "manifest sampling_rate_hz");
    if (kv.count("classes") && !kv["classes"].empty()) f.class_names = split(kv["classes"], ',');
    if (!kv.count("devices") || kv["devices"].empty()) throw DataError("manifest lists no devices");
    for (const auto& entry : split(kv["devices"], ',')) {
        auto parts = split(entry, ':');
        DeviceDescriptor d;
        d.device_id = parts[0];
        d.position_label = parts.size() > 1 ? parts[1] : parts[0];
        d.sampling_rate_hz = f.rate;
        f.devices.push_back(d);
    }
    if (kv.count("normalized")) f.normalized = parse_int(kv["normalized"], "manifest normalized") != 0;
    if (kv.count("split")) f.split_tag = kv["split"];
    return f;
}

void write_f32(const fs::path& path, const std::vector<float>& values) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write file: " + path.string());
    out.write(reinterpret_cast<const char*>(values.data()),
              static_cast<std::streamsize>(values.size() * sizeof(float)));
    if (!out) throw DataError("write failed: " + path.string());
}

std::vector<float> read_f32(const fs::path& path, size_t expected) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file: " + path.string());
    std::vector<float> values(expected);
    in.read(reinterpret_cast<char*>(values.data()),
            static_cast<std::streamsize>(expected * sizeof(float)));
    if (static_cast<size_t>(in.gcount()) != expected * sizeof(float)) {
        throw DataError(path.string() + ": expected " + std::to_string(expected) +
                        " float32 values");
    }
    char extra;
    if (in.read(&extra, 1)) throw DataError(path.string() + ": trailing bytes beyond declared shape");
    return values;
}

}  // namespace

void save_dataset(const MultiDeviceDataset& ds, const std::string& root_path) {
    ds.validate();
    const fs::path root(root_path);
    fs::create_directories(root / "windows");
    write_text(root / "manifest",
               manifest_text(ds.name, ds.channels, ds.devices[0].sampling_rate_hz, ds.class_names,
                             ds.devices, ds.normalized, ds.split_tag));
    for (size_t d = 0; d < ds.devices.size(); ++d) {
        const auto& id = ds.devices[d].device_id;
        write_f32(root / "windows" / (id + ".f32"), ds.windows[d]);
        std::ostringstream shape;
        shape << "dims = " << ds.num_windows << " " << ds.window_len << " " << ds.channels << "\n"
              << "dtype = f32\n"
              << "order = row_major\n";
        write_text(root / "windows" / (id + ".shape"), shape.str());
    }
    std::ostringstream meta;
    meta << "window,label,subject\n";
    for (std::int64_t j = 0; j < ds.num_windows; ++j) {
        meta << j << ",";
        if (ds.has_labels()) meta << ds.labels[static_cast<size_t>(j)];
        meta << "," << ds.subject_ids[static_cast<size_t>(j)] << "\n";
    }
    write_text(root / "windows" / "meta.csv", meta.str());
}

MultiDeviceDataset load_dataset(const std::string& root_path) {
    const fs::path root(root_path);
    auto mf = load_manifest(root);
    if (!fs::exists(root / "windows")) {
        throw DataError(root_path + ": no windows/ directory; segment raw data first");
    }

    MultiDeviceDataset ds;
    ds.name = mf.name;
    ds.devices = mf.devices;
    ds.channels = mf.channels;
    ds.class_names = mf.class_names;
    ds.normalized = mf.normalized;
    ds.split_tag = mf.split_tag;

    for (const auto& dev : ds.devices) {
        const fs::path shape_path = root / "windows" / (dev.device_id + ".shape");
        const fs::path data_path = root / "windows" / (dev.device_id + ".f32");
        if (!fs::exists(data_path)) {
            throw DataError("device '" + dev.device_id + "' listed in manifest but " +
                            data_path.string() + " is missing");
        }
        auto kv = parse_kv(read_lines(shape_path), shape_path.string());
        auto dims = split(kv.at("dims"), ' ');
        if (dims.size() != 3) throw DataError(shape_path.string() + ": dims must be 'T W C'");
        const auto t = parse_int(dims[0], "shape T");
        const auto w = parse_int(dims[1], "shape W");
        const auto c = parse_int(dims[2], "shape C");
        if (ds.num_windows == 0 && ds.window_len == 0) {
            ds.num_windows = t;
            ds.window_len = w;
        }
        if (t != ds.num_windows || w != ds.window_len || c != ds.channels) {
            throw DataError("device '" + dev.device_id + "' shape [" + std::to_string(t) + "," +
                            std::to_string(w) + "," + std::to_string(c) +
                            "] disagrees with dataset shape");
        }
        ds.windows.push_back(read_f32(data_path, static_cast<size_t>(t * w * c)));
    }

    auto meta_lines = read_lines(root / "windows" / "meta.csv");
    if (meta_lines.empty() || meta_lines[0] != "window,label,subject") {
        throw DataError("windows/meta.csv: bad header");
    }
    bool any_label = false;
    for (size_t i = 1; i < meta_lines.size(); ++i) {
        if (trim(meta_lines[i]).empty()) continue;
        auto cols = split(meta_lines[i], ',');
        if (cols.size() != 3) {
            throw DataError("windows/meta.csv row " + std::to_string(i + 1) + ": expected 3 columns");
        }
        if (!cols[1].empty()) {
            ds.labels.push_back(static_cast<int>(parse_int(cols[1], "meta.csv label")));
            any_label = true;
        }
        ds.subject_ids.push_back(static_cast<int>(parse_int(cols[2], "meta.csv subject")));
    }
    if (!any_label) ds.labels.clear();
    ds.validate();
    return ds;
}

void save_raw(const RawRecording& rec, const std::string& root_path) {
    if (rec.streams.empty()) throw DataError("recording has no streams");
    const fs::path root(root_path);
    fs::create_directories(root / "data");
    std::vector<DeviceDescriptor> devices;
    devices.reserve(rec.streams.size());
    for (const auto& s : rec.streams) devices.push_back(s.device);
    write_text(root / "manifest",
               manifest_text(rec.name, rec.streams[0].channels,
                             rec.streams[0].device.sampling_rate_hz, rec.class_names, devices,
                             false, "full"));
    for (const auto& s : rec.streams) {
        std::ostringstream csv;
        if (s.channels == 6) {
            csv << kImuHeader << "\n";
        } else {
            csv << "timestamp";
            for (std::int64_t c = 0; c < s.channels; ++c) csv << ",c" << c;
            csv << "\n";
        }
        for (std::int64_t k = 0; k < s.num_samples(); ++k) {
            csv << format_real(s.timestamps[static_cast<size_t>(k)]);
            for (std::int64_t c = 0; c < s.channels; ++c) {
                csv << "," << format_real(s.values[static_cast<size_t>(k * s.channels + c)]);
            }
            csv << "\n";
        }
        write_text(root / "data" / (s.device.device_id + ".csv"), csv.str());
    }
    if (rec.labels) {
        std::ostringstream csv;
        csv << "timestamp,label,subject\n";
        const auto& track = *rec.labels;
        for (size_t k = 0; k < track.timestamps.size(); ++k) {
            csv << format_real(track.timestamps[k]) << "," << track.labels[k] << ","
                << track.subjects[k] << "\n";
        }
        write_text(root / "labels.csv", csv.str());
    }
}

RawRecording load_raw(const std::string& root_path) {
    const fs::path root(root_path);
    auto mf = load_manifest(root);

    RawRecording rec;
    rec.name = mf.name;
    rec.class_names = mf.class_names;
    for (const auto& dev : mf.devices) {
        const fs::path path = root / "data" / (dev.device_id + ".csv");
        if (!fs::exists(path)) {
            throw DataError("device '" + dev.device_id + "' listed in manifest but " +
                            path.string() + " is missing");
        }
        auto lines = read_lines(path);
        if (lines.empty()) throw DataError(path.string() + ": empty file");
        RawStream s;
        s.device = dev;
        s.channels = mf.channels;
        for (size_t i = 1; i < lines.size(); ++i) {
            if (trim(lines[i]).empty()) continue;
            auto cols = split(lines[i], ',');
            if (static_cast<std::int64_t>(cols.size()) != mf.channels + 1) {
                throw DataError(path.string() + " row " + std::to_string(i + 1) + ": expected " +
                                std::to_string(mf.channels + 1) + " columns, got " +
                                std::to_string(cols.size()));
            }
            s.timestamps.push_back(parse_real(cols[0], path.string() + " timestamp"));
            for (std::int64_t c = 1; c <= mf.channels; ++c) {
                s.values.push_back(static_cast<float>(
                    parse_real(cols[static_cast<size_t>(c)], path.string() + " value")));
            }
        }
        rec.streams.push_back(std::move(s));
    }

    const fs::path label_path = root / "labels.csv";
    if (fs::exists(label_path)) {
        auto lines = read_lines(label_path);
        if (lines.empty() || lines[0] != "timestamp,label,subject") {
            throw DataError(label_path.string() + ": bad header");
        }
        LabelTrack track;
        for (size_t i = 1; i < lines.size(); ++i) {
            if (trim(lines[i]).empty()) continue;
            auto cols = split(lines[i], ',');
            if (cols.size() != 3) {
                throw DataError(label_path.string() + " row " + std::to_string(i + 1) +
                                ": expected 3 columns");
            }
            track.timestamps.push_back(parse_real(cols[0], "labels.csv timestamp"));
            track.labels.push_back(static_cast<int>(parse_int(cols[1], "labels.csv label")));
            track.subjects.push_back(static_cast<int>(parse_int(cols[2], "labels.csv subject")));
        }
        rec.labels = std::move(track);
    }
    return rec;
}

// ---------------------------------------------------------------------------
// Splits and label subsets
// ---------------------------------------------------------------------------

std::vector<GroupFold> split_groups(const MultiDeviceDataset& ds, int num_groups,
                                    std::uint64_t seed) {
    if (num_groups < 2) throw ConfigError("num_groups must be >= 2");
    std::set<int> distinct(ds.subject_ids.begin(), ds.subject_ids.end());
    std::vector<int> subjects(distinct.begin(), distinct.end());
    if (static_cast<size_t>(num_groups) > subjects.size()) {
        throw ConfigError("num_groups = " + std::to_string(num_groups) + " exceeds " +
                          std::to_string(subjects.size()) + " distinct subjects");
    }
    auto rng = make_rng(seed, "split_groups");
    std::shuffle(subjects.begin(), subjects.end(), rng);

    std::vector<std::vector<int>> groups(static_cast<size_t>(num_groups));
    for (size_t i = 0; i < subjects.size(); ++i) {
        groups[i % static_cast<size_t>(num_groups)].push_back(subjects[i]);
    }
    for (auto& g : groups) std::sort(g.begin(), g.end());

    std::vector<GroupFold> folds;
    for (size_t g = 0; g < groups.size(); ++g) {
        GroupFold fold;
        fold.heldout_subjects = groups[g];
        for (size_t o = 0; o < groups.size(); ++o) {
            if (o == g) continue;
            fold.train_subjects.insert(fold.train_subjects.end(), groups[o].begin(),
                                       groups[o].end());
        }
        std::sort(fold.train_subjects.begin(), fold.train_subjects.end());
        folds.push_back(std::move(fold));
    }
    return folds;
}

MultiDeviceDataset subset_by_subjects(const MultiDeviceDataset& ds,
                                      const std::vector<int>& subjects,
                                      const std::string& split_tag) {
    std::set<int> keep(subjects.begin(), subjects.end());
    std::vector<std::int64_t> indices;
    for (std::int64_t j = 0; j < ds.num_windows; ++j) {
        if (keep.count(ds.subject_ids[static_cast<size_t>(j)])) indices.push_back(j);
    }
    MultiDeviceDataset out;
    out.name = ds.name;
    out.devices = ds.devices;
    out.num_windows = static_cast<std::int64_t>(indices.size());
    out.window_len = ds.window_len;
    out.channels = ds.channels;
    out.class_names = ds.class_names;
    out.normalized = ds.normalized;
    out.split_tag = split_tag;
    const auto wsize = static_cast<size_t>(ds.window_size());
    for (size_t d = 0; d < ds.windows.size(); ++d) {
        std::vector<float> w(static_cast<size_t>(out.num_windows) * wsize);
        for (size_t o = 0; o < indices.size(); ++o) {
            std::memcpy(w.data() + o * wsize,
                        ds.windows[d].data() + static_cast<size_t>(indices[o]) * wsize,
                        wsize * sizeof(float));
        }
        out.windows.push_back(std::move(w));
    }
    for (std::int64_t j : indices) {
        if (ds.has_labels()) out.labels.push_back(ds.labels[static_cast<size_t>(j)]);
        out.subject_ids.push_back(ds.subject_ids[static_cast<size_t>(j)]);
    }
    return out;
}

LabeledSubset sample_label_fraction(const MultiDeviceDataset& ds, const std::string& device_id,
                                    double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction <= 1.0)) {
        throw ConfigError("label fraction must be in (0, 1], got " + format_real(fraction));
    }
    if (!ds.has_labels()) throw DataError("dataset has no labels to subsample");
    ds.device_index(device_id);  // existence check

    const int num_classes = static_cast<int>(ds.class_names.size());
    std::vector<std::vector<std::int64_t>> per_class(static_cast<size_t>(num_classes));
    for (std::int64_t j = 0; j < ds.num_windows; ++j) {
        per_class[static_cast<size_t>(ds.labels[static_cast<size_t>(j)])].push_back(j);
    }
    std::int64_t total = ds.num_windows;
    const auto target = static_cast<std::int64_t>(std::llround(fraction * static_cast<double>(total)));

    // Largest-remainder quotas, ties broken by ascending class id.
    std::vector<std::int64_t> quota(static_cast<size_t>(num_classes), 0);
    std::vector<std::pair<double, int>> remainders;
    std::int64_t assigned = 0;
    for (int c = 0; c < num_classes; ++c) {
        const double exact = fraction * static_cast<double>(per_class[static_cast<size_t>(c)].size());
        quota[static_cast<size_t>(c)] = static_cast<std::int64_t>(std::floor(exact));
        assigned += quota[static_cast<size_t>(c)];
        remainders.push_back({exact - std::floor(exact), c});
    }
    std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (auto& [rem, c] : remainders) {
        if (assigned >= target) break;
        if (per_class[static_cast<size_t>(c)].empty()) continue;
        if (quota[static_cast<size_t>(c)] <
            static_cast<std::int64_t>(per_class[static_cast<size_t>(c)].size())) {
            quota[static_cast<size_t>(c)]++;
            assigned++;
        }
    }
    for (int c = 0; c < num_classes; ++c) {
        if (!per_class[static_cast<size_t>(c)].empty() && quota[static_cast<size_t>(c)] == 0) {
            quota[static_cast<size_t>(c)] = 1;
        }
    }

    LabeledSubset subset;
    subset.source = &ds;
    subset.device_id = device_id;
    subset.fraction = fraction;
    for (int c = 0; c < num_classes; ++c) {
        auto pool = per_class[static_cast<size_t>(c)];
        auto rng = make_rng(seed, "label_fraction", static_cast<std::uint64_t>(c));
        std::shuffle(pool.begin(), pool.end(), rng);
        pool.resize(static_cast<size_t>(std::min<std::int64_t>(
            quota[static_cast<size_t>(c)], static_cast<std::int64_t>(pool.size()))));
        subset.window_indices.insert(subset.window_indices.end(), pool.begin(), pool.end());
    }
    std::sort(subset.window_indices.begin(), subset.window_indices.end());
    return subset;
}

// ---------------------------------------------------------------------------
// RealWorld-style adapter
// ---------------------------------------------------------------------------

namespace {

struct SensorFile {
    std::vector<double> timestamps;       // seconds
    std::vector<std::array<float, 3>> xyz;
};

SensorFile read_realworld_csv(const fs::path& path) {
    auto lines = read_lines(path);
    if (lines.empty()) throw DataError(path.string() + ": empty file");
    SensorFile f;
    for (size_t i = 1; i < lines.size(); ++i) {
        if (trim(lines[i]).empty()) continue;
        auto cols = split(lines[i], ',');
        if (cols.size() != 5) {
            throw DataError(path.string() + " row " + std::to_string(i + 1) +
                            ": expected 5 columns (id,attr_time,attr_x,attr_y,attr_z)");
        }
        f.timestamps.push_back(parse_real(cols[1], path.string() + " attr_time") / 1000.0);
        f.xyz.push_back({static_cast<float>(parse_real(cols[2], "attr_x")),
                         static_cast<float>(parse_real(cols[3], "attr_y")),
                         static_cast<float>(parse_real(cols[4], "attr_z"))});
    }
    if (f.timestamps.size() < 2) throw DataError(path.string() + ": fewer than two samples");
    return f;
}

// Linear interpolation of a 3-channel series onto a destination grid; ends
// are clamped.
std::vector<std::array<float, 3>> resample3(const SensorFile& src,
                                            const std::vector<double>& dst_ts) {
    std::vector<std::array<float, 3>> out(dst_ts.size());
    for (size_t i = 0; i < dst_ts.size(); ++i) {
        const double t = dst_ts[i];
        auto it = std::upper_bound(src.timestamps.begin(), src.timestamps.end(), t);
        if (it == src.timestamps.begin()) {
            out[i] = src.xyz.front();
            continue;
        }
        if (it == src.timestamps.end()) {
            out[i] = src.xyz.back();
            continue;
        }
        const auto hi = static_cast<size_t>(it - src.timestamps.begin());
        const size_t lo = hi - 1;
        const double span = src.timestamps[hi] - src.timestamps[lo];
        const double a = span > 0 ? (t - src.timestamps[lo]) / span : 0.0;
        for (int c = 0; c < 3; ++c) {
            out[i][static_cast<size_t>(c)] = static_cast<float>(
                (1.0 - a) * src.xyz[lo][static_cast<size_t>(c)] +
                a * src.xyz[hi][static_cast<size_t>(c)]);
        }
    }
    return out;
}

}  // namespace

RawRecording load_realworld(const std::string& root_path) {
    const fs::path root(root_path);
    if (!fs::exists(root)) throw DataError("no such directory: " + root_path);

    std::vector<std::pair<int, fs::path>> subjects;
    for (const auto& entry : fs::directory_iterator(root)) {
        if (!entry.is_directory()) continue;
        const std::string name = entry.path().filename().string();
        if (name.rfind("proband", 0) == 0) {
            subjects.push_back({static_cast<int>(parse_int(name.substr(7), "proband number")),
                                entry.path()});
        }
    }
    if (subjects.empty()) throw DataError(root_path + ": no proband<k> directories");
    std::sort(subjects.begin(), subjects.end());

    // Discover (activity, position) pairs from subject 1's file names.
    std::set<std::string> activities;
    std::set<std::string> positions;
    for (const auto& entry : fs::directory_iterator(subjects[0].second / "data")) {
        const std::string name = entry.path().filename().string();
        if (name.rfind("acc_", 0) != 0 || name.size() < 8) continue;
        const std::string stem = name.substr(4, name.size() - 8);  // strip acc_ and .csv
        const size_t us = stem.rfind('_');
        if (us == std::string::npos) continue;
        activities.insert(stem.substr(0, us));
        positions.insert(stem.substr(us + 1));
    }
    if (activities.empty() || positions.empty()) {
        throw DataError(root_path + ": no acc_<activity>_<position>.csv files found");
    }

    RawRecording rec;
    rec.name = "realworld";
    rec.class_names.assign(activities.begin(), activities.end());
    std::map<std::string, int> label_of;
    for (size_t i = 0; i < rec.class_names.size(); ++i) {
        label_of[rec.class_names[i]] = static_cast<int>(i);
    }

    std::vector<std::string> position_list(positions.begin(), positions.end());
    rec.streams.resize(position_list.size());
    LabelTrack track;

    double clock = 0.0;  // continuous re-based timeline across blocks
    double rate_estimate = 0.0;
    for (const auto& [subject_id, dir] : subjects) {
        for (const auto& activity : rec.class_names) {
            // Anchor grid: the first position's accelerometer timeline.
            const fs::path anchor_path =
                dir / "data" / ("acc_" + activity + "_" + position_list[0] + ".csv");
            if (!fs::exists(anchor_path)) {
                throw DataError("missing file: " + anchor_path.string());
            }
            SensorFile anchor = read_realworld_csv(anchor_path);
            const size_t n = anchor.timestamps.size();
            const double dt = (anchor.timestamps.back() - anchor.timestamps.front()) /
                              static_cast<double>(n - 1);
            if (rate_estimate == 0.0) rate_estimate = std::round(1.0 / dt);

            std::vector<double> block_ts(n);
            for (size_t k = 0; k < n; ++k) {
                block_ts[k] = clock + static_cast<double>(k) / rate_estimate;
            }

            for (size_t p = 0; p < position_list.size(); ++p) {
                const std::string& pos = position_list[p];
                const fs::path acc_path = dir / "data" / ("acc_" + activity + "_" + pos + ".csv");
                const fs::path gyr_path = dir / "data" / ("gyr_" + activity + "_" + pos + ".csv");
                if (!fs::exists(acc_path)) throw DataError("missing file: " + acc_path.string());
                if (!fs::exists(gyr_path)) throw DataError("missing file: " + gyr_path.string());
                SensorFile acc = read_realworld_csv(acc_path);
                SensorFile gyr = read_realworld_csv(gyr_path);
                auto acc_rs = resample3(acc, anchor.timestamps);
                auto gyr_rs = resample3(gyr, anchor.timestamps);

                auto& stream = rec.streams[p];
                if (stream.device.device_id.empty()) {
                    stream.device.device_id = pos;
                    stream.device.position_label = pos;
                    stream.device.sampling_rate_hz = rate_estimate;
                    stream.channels = 6;
                }
                for (size_t k = 0; k < n; ++k) {
                    stream.timestamps.push_back(block_ts[k]);
                    for (int c = 0; c < 3; ++c) stream.values.push_back(acc_rs[k][static_cast<size_t>(c)]);
                    for (int c = 0; c < 3; ++c) stream.values.push_back(gyr_rs[k][static_cast<size_t>(c)]);
                }
            }
            for (size_t k = 0; k < n; ++k) {
                track.timestamps.push_back(block_ts[k]);
                track.labels.push_back(label_of[activity]);
                track.subjects.push_back(subject_id);
            }
            clock = block_ts.back() + 1.0 / rate_estimate;
        }
    }
    rec.labels = std::move(track);
    return rec;
}

}  // namespace collossl::data
