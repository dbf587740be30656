// Synthetic time-synchronous multi-device generator plus the three
// perturbation injectors (sensor heterogeneity, missing devices, temporal
// misalignment).
//
// Signal model: each class owns a band-limited family of 2-3 sinusoids with
// class-specific frequencies (spaced >= 1 Hz), per-channel amplitude
// profiles and a per-class DC posture offset. Subjects perturb phase,
// amplitude and frequency slightly; every device observes the latent
// 6-channel signal through a fixed affine view (paired 3D rotation of the
// accelerometer and gyroscope triplets, per-channel gain and bias) plus
// i.i.d. Gaussian noise. Activities are laid out as contiguous per-class
// bouts on a continuous per-subject timeline, so windows inherit one label
// each and neighbouring windows usually share a class.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "collossl/dataset.hpp"

namespace collossl::synth {

struct SynthConfig {
    int num_devices = 5;
    int num_classes = 6;
    int num_subjects = 8;
    int windows_per_subject_per_class = 43;
    double sampling_rate_hz = 32.0;
    double window_seconds = 1.5;
    // Scale of per-device divergence: rotation angle (rad), gain and bias
    // spread all grow linearly with this. 0 => every device sees the
    // identical signal.
    double device_transform_spread = 0.6;
    double noise_std = 0.35;
    std::uint64_t seed = 1;

    void validate() const;
};

enum class PerturbationKind { heterogeneity, missing, misalignment };

struct PerturbationSpec {
    PerturbationKind kind = PerturbationKind::heterogeneity;
    double sigma_scale = 0.0;   // heterogeneity: S ~ Normal(1, sigma_scale)
    double sigma_bias = 0.0;    // heterogeneity: B ~ Normal(0, sigma_bias)
    double p_unavailable = 0.0; // missing: per-device per-window zeroing probability
    double shift_seconds = 0.0; // misalignment: timestamp shift of non-anchor devices
    std::vector<std::string> target_devices;  // empty = every eligible device
    std::uint64_t seed = 1;

    void validate() const;
};

// Continuous per-device streams with a per-sample label track; feed to
// data::segment_windows (or inject_misalignment) to get windows.
data::RawRecording generate_streams(const SynthConfig& cfg);

// generate_streams + segmentation with the configured window length.
data::MultiDeviceDataset generate(const SynthConfig& cfg);

// X' = S * (X - B) with S, B drawn once per target device. Raw values only:
// applying after normalization throws (the scale/bias error model describes
// sensor hardware, which sits before any preprocessing).
data::MultiDeviceDataset inject_heterogeneity(const data::MultiDeviceDataset& ds,
                                              const PerturbationSpec& spec);

// Zeroes whole windows of target devices with probability p_unavailable.
// The anchor device must not be targeted (it is always available).
data::MultiDeviceDataset inject_missing(const data::MultiDeviceDataset& ds,
                                        const PerturbationSpec& spec,
                                        const std::string& anchor_id);

// Shifts non-anchor device timestamps by shift_seconds, re-samples them onto
// the anchor grid (linear interpolation for fractional-sample shifts) and
// re-segments; leading windows without full coverage are dropped on all
// devices.
data::MultiDeviceDataset inject_misalignment(const data::RawRecording& rec,
                                             const PerturbationSpec& spec,
                                             const std::string& anchor_id,
                                             double window_seconds, double overlap = 0.0);

}  // namespace collossl::synth
