#include "collossl/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

namespace collossl::synth {

namespace {

constexpr int kChannels = 6;
constexpr int kMaxHarmonics = 3;

using Vec3 = std::array<double, 3>;
using Mat3 = std::array<std::array<double, 3>, 3>;

Mat3 rotation_about(const Vec3& axis, double angle) {
    const double c = std::cos(angle), s = std::sin(angle), t = 1.0 - c;
    const double x = axis[0], y = axis[1], z = axis[2];
    return {{{t * x * x + c, t * x * y - s * z, t * x * z + s * y},
             {t * x * y + s * z, t * y * y + c, t * y * z - s * x},
             {t * x * z - s * y, t * y * z + s * x, t * z * z + c}}};
}

struct ClassParams {
    int harmonics = 3;
    std::array<double, kMaxHarmonics> freq{};
    // amplitude / phase per harmonic per channel
    std::array<std::array<double, kChannels>, kMaxHarmonics> amp{};
    std::array<std::array<double, kChannels>, kMaxHarmonics> phase{};
    std::array<double, kChannels> dc{};
};

ClassParams make_class_params(int c, std::uint64_t seed) {
    auto rng = make_rng(seed, "class", static_cast<std::uint64_t>(c));
    std::uniform_real_distribution<double> uamp(0.35, 1.0);
    std::uniform_real_distribution<double> uphase(0.0, 2.0 * std::numbers::pi);
    // Posture offsets stay small so classes are told apart mostly by their
    // frequency signature, not by channel means.
    std::uniform_real_distribution<double> udc_acc(-0.35, 0.35);
    std::uniform_real_distribution<double> udc_gyr(-0.1, 0.1);

    ClassParams p;
    p.harmonics = 2 + (c % 2);
    // Base frequencies spaced 1 Hz apart keep classes separable; harmonic
    // multipliers stay below Nyquist for the default 32 Hz rate.
    const double base = 1.1 + 1.0 * static_cast<double>(c);
    const std::array<double, kMaxHarmonics> mult = {1.0, 1.9, 2.4};
    const std::array<double, kMaxHarmonics> decay = {1.0, 0.55, 0.3};
    for (int h = 0; h < p.harmonics; ++h) {
        p.freq[static_cast<size_t>(h)] = base * mult[static_cast<size_t>(h)];
        for (int k = 0; k < kChannels; ++k) {
            p.amp[static_cast<size_t>(h)][static_cast<size_t>(k)] =
                uamp(rng) * decay[static_cast<size_t>(h)];
            p.phase[static_cast<size_t>(h)][static_cast<size_t>(k)] = uphase(rng);
        }
    }
    for (int k = 0; k < kChannels; ++k) {
        p.dc[static_cast<size_t>(k)] = k < 3 ? udc_acc(rng) : udc_gyr(rng);
    }
    return p;
}

// Subjects differ in pace, intensity and wearing style (a small rotation of
// the latent frame); held-out-subject evaluation hinges on this spread.
struct SubjectParams {
    std::vector<double> class_phase;  // one per class
    double freq_factor = 1.0;
    double amp_scale = 1.0;
    Mat3 style;
};

SubjectParams make_subject_params(int u, int num_classes, std::uint64_t seed) {
    auto rng = make_rng(seed, "subject", static_cast<std::uint64_t>(u));
    std::uniform_real_distribution<double> uphase(0.0, 2.0 * std::numbers::pi);
    std::normal_distribution<double> normal(0.0, 1.0);
    SubjectParams p;
    for (int c = 0; c < num_classes; ++c) p.class_phase.push_back(uphase(rng));
    p.freq_factor = 1.0 + 0.04 * normal(rng);
    p.amp_scale = std::max(0.4, 1.0 + 0.15 * normal(rng));
    Vec3 axis = {normal(rng), normal(rng), normal(rng)};
    const double n = std::sqrt(axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]);
    if (n > 0) {
        for (auto& a : axis) a /= n;
    } else {
        axis = {0.0, 0.0, 1.0};
    }
    p.style = rotation_about(axis, 0.15 * normal(rng));
    return p;
}

std::array<double, kChannels> apply_style(const Mat3& rot,
                                          const std::array<double, kChannels>& x) {
    std::array<double, kChannels> out{};
    for (int block = 0; block < 2; ++block) {
        for (int r = 0; r < 3; ++r) {
            double acc = 0.0;
            for (int c = 0; c < 3; ++c) {
                acc += rot[static_cast<size_t>(r)][static_cast<size_t>(c)] *
                       x[static_cast<size_t>(block * 3 + c)];
            }
            out[static_cast<size_t>(block * 3 + r)] = acc;
        }
    }
    return out;
}

struct DeviceView {
    Mat3 rot;                             // applied to both sensor triplets
    std::array<double, kChannels> gain{};
    std::array<double, kChannels> bias{};
};

// All view magnitudes grow linearly in `spread`, so a larger spread with
// the same seed strictly widens the divergence between device views.
DeviceView make_device_view(int device, double spread, std::uint64_t seed) {
    auto rng = make_rng(seed, "device_view", static_cast<std::uint64_t>(device));
    std::normal_distribution<double> normal(0.0, 1.0);
    Vec3 axis = {normal(rng), normal(rng), normal(rng)};
    const double n = std::sqrt(axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]);
    if (n > 0) {
        for (auto& a : axis) a /= n;
    } else {
        axis = {0.0, 0.0, 1.0};
    }
    DeviceView v;
    v.rot = rotation_about(axis, spread * normal(rng));
    for (int k = 0; k < kChannels; ++k) {
        v.gain[static_cast<size_t>(k)] = std::max(0.05, 1.0 + 0.3 * spread * normal(rng));
        v.bias[static_cast<size_t>(k)] = 0.4 * spread * normal(rng);
    }
    return v;
}

std::array<double, kChannels> apply_view(const DeviceView& v,
                                         const std::array<double, kChannels>& x) {
    std::array<double, kChannels> out{};
    for (int block = 0; block < 2; ++block) {
        for (int r = 0; r < 3; ++r) {
            double acc = 0.0;
            for (int c = 0; c < 3; ++c) {
                acc += v.rot[static_cast<size_t>(r)][static_cast<size_t>(c)] *
                       x[static_cast<size_t>(block * 3 + c)];
            }
            out[static_cast<size_t>(block * 3 + r)] = acc;
        }
    }
    for (int k = 0; k < kChannels; ++k) {
        out[static_cast<size_t>(k)] =
            v.gain[static_cast<size_t>(k)] * out[static_cast<size_t>(k)] +
            v.bias[static_cast<size_t>(k)];
    }
    return out;
}

}  // namespace

void SynthConfig::validate() const {
    if (num_devices < 2) throw ConfigError("synth: num_devices must be >= 2");
    if (num_classes < 2) throw ConfigError("synth: num_classes must be >= 2");
    if (num_subjects < 1) throw ConfigError("synth: num_subjects must be >= 1");
    if (windows_per_subject_per_class < 1) {
        throw ConfigError("synth: windows_per_subject_per_class must be >= 1");
    }
    if (!(sampling_rate_hz > 0)) throw ConfigError("synth: sampling_rate_hz must be positive");
    if (!(window_seconds > 0)) throw ConfigError("synth: window_seconds must be positive");
    if (device_transform_spread < 0) throw ConfigError("synth: spread must be >= 0");
    if (noise_std < 0) throw ConfigError("synth: noise_std must be >= 0");
    const double wf = sampling_rate_hz * window_seconds;
    if (std::abs(wf - std::round(wf)) > 1e-6) {
        throw ConfigError("synth: window_seconds * sampling_rate_hz must be an integer");
    }
}

void PerturbationSpec::validate() const {
    if (sigma_scale < 0 || sigma_bias < 0) throw ConfigError("perturbation: sigmas must be >= 0");
    if (!(p_unavailable >= 0.0 && p_unavailable <= 1.0)) {
        throw ConfigError("perturbation: p_unavailable must be in [0, 1]");
    }
    if (shift_seconds < 0) throw ConfigError("perturbation: shift_seconds must be >= 0");
}

data::RawRecording generate_streams(const SynthConfig& cfg) {
    cfg.validate();
    const auto window_len =
        static_cast<std::int64_t>(std::llround(cfg.sampling_rate_hz * cfg.window_seconds));
    const std::int64_t bout_samples = cfg.windows_per_subject_per_class * window_len;
    const std::int64_t subject_samples = cfg.num_classes * bout_samples;
    const std::int64_t total = cfg.num_subjects * subject_samples;
    const double period = 1.0 / cfg.sampling_rate_hz;

    std::vector<ClassParams> classes;
    for (int c = 0; c < cfg.num_classes; ++c) classes.push_back(make_class_params(c, cfg.seed));
    std::vector<SubjectParams> subjects;
    for (int u = 0; u < cfg.num_subjects; ++u) {
        subjects.push_back(make_subject_params(u, cfg.num_classes, cfg.seed));
    }
    std::vector<DeviceView> views;
    for (int i = 0; i < cfg.num_devices; ++i) {
        views.push_back(make_device_view(i, cfg.device_transform_spread, cfg.seed));
    }

    data::RawRecording rec;
    rec.name = "synth";
    for (int c = 0; c < cfg.num_classes; ++c) rec.class_names.push_back("class_" + std::to_string(c));
    for (int i = 0; i < cfg.num_devices; ++i) {
        data::RawStream s;
        s.device.device_id = "dev" + std::to_string(i);
        s.device.position_label = "pos" + std::to_string(i);
        s.device.sampling_rate_hz = cfg.sampling_rate_hz;
        s.channels = kChannels;
        s.timestamps.reserve(static_cast<size_t>(total));
        s.values.reserve(static_cast<size_t>(total * kChannels));
        rec.streams.push_back(std::move(s));
    }
    data::LabelTrack track;
    track.timestamps.reserve(static_cast<size_t>(total));

    for (int u = 0; u < cfg.num_subjects; ++u) {
        std::vector<int> bout_order(static_cast<size_t>(cfg.num_classes));
        for (int c = 0; c < cfg.num_classes; ++c) bout_order[static_cast<size_t>(c)] = c;
        auto order_rng = make_rng(cfg.seed, "bout_order", static_cast<std::uint64_t>(u));
        std::shuffle(bout_order.begin(), bout_order.end(), order_rng);

        std::vector<Rng> noise_rngs;
        for (int i = 0; i < cfg.num_devices; ++i) {
            noise_rngs.push_back(make_rng(cfg.seed, "noise", static_cast<std::uint64_t>(i),
                                          static_cast<std::uint64_t>(u)));
        }
        std::normal_distribution<double> noise(0.0, 1.0);

        const std::int64_t subject_start = u * subject_samples;
        for (int b = 0; b < cfg.num_classes; ++b) {
            const int c = bout_order[static_cast<size_t>(b)];
            const auto& cp = classes[static_cast<size_t>(c)];
            const auto& sp = subjects[static_cast<size_t>(u)];
            for (std::int64_t k = 0; k < bout_samples; ++k) {
                const std::int64_t global = subject_start + b * bout_samples + k;
                const double t_global = static_cast<double>(global) * period;
                const double t_local = static_cast<double>(k) * period;

                std::array<double, kChannels> latent{};
                for (int h = 0; h < cp.harmonics; ++h) {
                    const double w =
                        2.0 * std::numbers::pi * cp.freq[static_cast<size_t>(h)] * sp.freq_factor;
                    for (int ch = 0; ch < kChannels; ++ch) {
                        latent[static_cast<size_t>(ch)] +=
                            sp.amp_scale * cp.amp[static_cast<size_t>(h)][static_cast<size_t>(ch)] *
                            std::sin(w * t_local +
                                     cp.phase[static_cast<size_t>(h)][static_cast<size_t>(ch)] +
                                     sp.class_phase[static_cast<size_t>(c)]);
                    }
                }
                for (int ch = 0; ch < kChannels; ++ch) {
                    latent[static_cast<size_t>(ch)] += cp.dc[static_cast<size_t>(ch)];
                }
                latent = apply_style(sp.style, latent);

                for (int i = 0; i < cfg.num_devices; ++i) {
                    auto seen = apply_view(views[static_cast<size_t>(i)], latent);
                    auto& stream = rec.streams[static_cast<size_t>(i)];
                    stream.timestamps.push_back(t_global);
                    for (int ch = 0; ch < kChannels; ++ch) {
                        double v = seen[static_cast<size_t>(ch)];
                        if (cfg.noise_std > 0) {
                            v += cfg.noise_std * noise(noise_rngs[static_cast<size_t>(i)]);
                        }
                        stream.values.push_back(static_cast<float>(v));
                    }
                }
                track.timestamps.push_back(t_global);
                track.labels.push_back(c);
                track.subjects.push_back(u);
            }
        }
    }
    rec.labels = std::move(track);
    return rec;
}

data::MultiDeviceDataset generate(const SynthConfig& cfg) {
    return data::segment_windows(generate_streams(cfg), cfg.window_seconds, 0.0);
}

data::MultiDeviceDataset inject_heterogeneity(const data::MultiDeviceDataset& ds,
                                              const PerturbationSpec& spec) {
    spec.validate();
    if (spec.kind != PerturbationKind::heterogeneity) {
        throw ConfigError("inject_heterogeneity: spec.kind mismatch");
    }
    if (ds.normalized) {
        throw DataError("inject_heterogeneity must run on raw values, before normalization");
    }
    std::vector<std::string> targets = spec.target_devices;
    if (targets.empty()) {
        for (const auto& d : ds.devices) targets.push_back(d.device_id);
    }
    data::MultiDeviceDataset out = ds;
    for (const auto& id : targets) {
        const int d = ds.device_index(id);
        auto rng = make_rng(spec.seed, "heterogeneity", static_cast<std::uint64_t>(d));
        std::normal_distribution<double> normal(0.0, 1.0);
        const double scale = 1.0 + spec.sigma_scale * normal(rng);
        const double bias = spec.sigma_bias * normal(rng);
        for (auto& v : out.windows[static_cast<size_t>(d)]) {
            v = static_cast<float>(scale * (static_cast<double>(v) - bias));
        }
    }
    return out;
}

data::MultiDeviceDataset inject_missing(const data::MultiDeviceDataset& ds,
                                        const PerturbationSpec& spec,
                                        const std::string& anchor_id) {
    spec.validate();
    if (spec.kind != PerturbationKind::missing) {
        throw ConfigError("inject_missing: spec.kind mismatch");
    }
    std::vector<std::string> targets = spec.target_devices;
    if (targets.empty()) {
        for (const auto& d : ds.devices) {
            if (d.device_id != anchor_id) targets.push_back(d.device_id);
        }
    }
    for (const auto& id : targets) {
        if (id == anchor_id) {
            throw ConfigError("inject_missing: the anchor device is always available and "
                              "cannot be targeted");
        }
    }
    data::MultiDeviceDataset out = ds;
    const auto wsize = static_cast<size_t>(ds.window_size());
    for (const auto& id : targets) {
        const int d = ds.device_index(id);
        auto rng = make_rng(spec.seed, "missing", static_cast<std::uint64_t>(d));
        std::uniform_real_distribution<double> uniform(0.0, 1.0);
        for (std::int64_t j = 0; j < ds.num_windows; ++j) {
            if (uniform(rng) < spec.p_unavailable) {
                std::fill_n(out.windows[static_cast<size_t>(d)].begin() +
                                static_cast<std::ptrdiff_t>(static_cast<size_t>(j) * wsize),
                            wsize, 0.0f);
            }
        }
    }
    return out;
}

data::MultiDeviceDataset inject_misalignment(const data::RawRecording& rec,
                                             const PerturbationSpec& spec,
                                             const std::string& anchor_id,
                                             double window_seconds, double overlap) {
    spec.validate();
    if (spec.kind != PerturbationKind::misalignment) {
        throw ConfigError("inject_misalignment: spec.kind mismatch");
    }
    bool anchor_found = false;
    for (const auto& s : rec.streams) anchor_found |= (s.device.device_id == anchor_id);
    if (!anchor_found) throw DataError("inject_misalignment: unknown anchor '" + anchor_id + "'");

    std::vector<std::string> targets = spec.target_devices;
    if (targets.empty()) {
        for (const auto& s : rec.streams) {
            if (s.device.device_id != anchor_id) targets.push_back(s.device.device_id);
        }
    }
    for (const auto& id : targets) {
        if (id == anchor_id) throw ConfigError("inject_misalignment: anchor cannot be shifted");
    }

    data::RawRecording shifted = rec;
    const double rate = rec.streams[0].device.sampling_rate_hz;
    for (auto& stream : shifted.streams) {
        if (std::find(targets.begin(), targets.end(), stream.device.device_id) == targets.end()) {
            continue;
        }
        // Sample recorded at t is now stamped t + shift; re-sampled on the
        // original grid the device provides value(t - shift) with linear
        // interpolation between its own samples.
        const auto& src = rec.streams[static_cast<size_t>(&stream - shifted.streams.data())];
        const std::int64_t n = src.num_samples();
        const std::int64_t ch = src.channels;
        for (std::int64_t k = 0; k < n; ++k) {
            const double pos = static_cast<double>(k) - spec.shift_seconds * rate;
            const auto lo = static_cast<std::int64_t>(std::floor(pos));
            const double frac = pos - static_cast<double>(lo);
            const std::int64_t a = std::clamp<std::int64_t>(lo, 0, n - 1);
            const std::int64_t b = std::clamp<std::int64_t>(lo + 1, 0, n - 1);
            for (std::int64_t c = 0; c < ch; ++c) {
                const double va = src.values[static_cast<size_t>(a * ch + c)];
                const double vb = src.values[static_cast<size_t>(b * ch + c)];
                stream.values[static_cast<size_t>(k * ch + c)] =
                    static_cast<float>((1.0 - frac) * va + frac * vb);
            }
        }
    }

    data::MultiDeviceDataset ds = data::segment_windows(shifted, window_seconds, overlap);

    // Leading grid samples fall before shifted coverage; drop every window
    // that touches them, on all devices.
    const auto undefined =
        static_cast<std::int64_t>(std::ceil(spec.shift_seconds * rate - 1e-9));
    const std::int64_t drop = undefined <= 0 ? 0 : (undefined + ds.window_len - 1) / ds.window_len;
    if (drop == 0) return ds;
    if (drop >= ds.num_windows) throw DataError("misalignment shift leaves no complete windows");

    data::MultiDeviceDataset out = ds;
    out.num_windows = ds.num_windows - drop;
    const auto wsize = static_cast<size_t>(ds.window_size());
    for (size_t d = 0; d < ds.windows.size(); ++d) {
        out.windows[d].assign(ds.windows[d].begin() + static_cast<std::ptrdiff_t>(
                                                          static_cast<size_t>(drop) * wsize),
                              ds.windows[d].end());
    }
    if (ds.has_labels()) {
        out.labels.assign(ds.labels.begin() + drop, ds.labels.end());
    }
    out.subject_ids.assign(ds.subject_ids.begin() + drop, ds.subject_ids.end());
    out.validate();
    return out;
}

}  // namespace collossl::synth
