// Time-synchronous multi-device dataset model: windowed containers, raw
// stream segmentation, normalization, on-disk layout and subject splits.

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "collossl/common.hpp"

namespace collossl::data {

struct DeviceDescriptor {
    std::string device_id;
    double sampling_rate_hz = 0.0;
    std::string position_label;
};

// Windowed container shared by every pipeline stage. All devices hold the
// same [T, W, C] geometry; window j covers the identical wall-clock interval
// on every device, so labels and subjects are per-window, not per-device.
struct MultiDeviceDataset {
    std::string name = "dataset";
    std::vector<DeviceDescriptor> devices;
    std::int64_t num_windows = 0;  // T
    std::int64_t window_len = 0;   // W (samples per window)
    std::int64_t channels = 0;     // C
    // Per device, row-major [T, W, C].
    std::vector<std::vector<float>> windows;
    std::vector<int> labels;       // per window; empty when unlabeled
    std::vector<int> subject_ids;  // per window
    std::vector<std::string> class_names;

    // Provenance carried through the pipeline so ordering rules (e.g.
    // heterogeneity before normalization) and leakage checks are assertable.
    bool normalized = false;
    std::string split_tag = "full";

    bool has_labels() const { return !labels.empty(); }
    std::int64_t num_devices() const { return static_cast<std::int64_t>(devices.size()); }
    std::int64_t window_size() const { return window_len * channels; }

    int device_index(const std::string& device_id) const;

    std::span<const float> window(std::int64_t device, std::int64_t t) const {
        return {windows[device].data() + t * window_size(), static_cast<size_t>(window_size())};
    }
    std::span<float> window(std::int64_t device, std::int64_t t) {
        return {windows[device].data() + t * window_size(), static_cast<size_t>(window_size())};
    }

    // Throws DataError on any structural violation (shape mismatch,
    // non-finite values, labels out of range).
    void validate() const;
};

// Label-stripped read-only view handed to pretraining. The absence of a
// labels member is the hygiene guarantee: code compiled against this type
// cannot read labels.
struct UnlabeledView {
    const std::vector<DeviceDescriptor>* devices = nullptr;
    std::int64_t num_windows = 0;
    std::int64_t window_len = 0;
    std::int64_t channels = 0;
    const std::vector<std::vector<float>>* windows = nullptr;

    std::int64_t num_devices() const { return static_cast<std::int64_t>(devices->size()); }
    std::int64_t window_size() const { return window_len * channels; }
    int device_index(const std::string& device_id) const;
    std::span<const float> window(std::int64_t device, std::int64_t t) const {
        return {(*windows)[device].data() + t * window_size(), static_cast<size_t>(window_size())};
    }
};

UnlabeledView unlabeled_view(const MultiDeviceDataset& ds);

struct LabeledSubset {
    const MultiDeviceDataset* source = nullptr;
    std::string device_id;
    std::vector<std::int64_t> window_indices;
    double fraction = 1.0;
};

// ---------------------------------------------------------------------------
// Raw continuous streams (pre-segmentation)
// ---------------------------------------------------------------------------

struct RawStream {
    DeviceDescriptor device;
    std::vector<double> timestamps;  // seconds, one per sample
    std::vector<float> values;       // row-major [N, C]
    std::int64_t channels = 0;

    std::int64_t num_samples() const { return static_cast<std::int64_t>(timestamps.size()); }
};

struct LabelTrack {
    std::vector<double> timestamps;
    std::vector<int> labels;
    std::vector<int> subjects;
};

struct RawRecording {
    std::string name = "recording";
    std::vector<RawStream> streams;
    std::optional<LabelTrack> labels;
    std::vector<std::string> class_names;
};

// Segments continuous per-device streams into a windowed dataset.
//
// All streams must share one sampling rate and start within half a sample
// period of each other; lengths may differ by at most one window (the common
// prefix is kept). Window label = majority vote over the label samples
// falling inside the window; a tie drops the window on all devices.
MultiDeviceDataset segment_windows(const RawRecording& rec, double window_seconds,
                                   double overlap = 0.0);

// ---------------------------------------------------------------------------
// Normalization
// ---------------------------------------------------------------------------

// Per-device per-channel affine map fitted on a training split: channel
// minimum maps to -1, maximum to +1. Held-out data normalized with reused
// stats may fall outside [-1, 1].
struct NormStats {
    // [device][channel]
    std::vector<std::vector<float>> channel_min;
    std::vector<std::vector<float>> channel_max;
    std::string source_tag;
};

struct NormalizeResult {
    MultiDeviceDataset dataset;
    NormStats stats;
};

NormalizeResult normalize(const MultiDeviceDataset& ds,
                          const std::optional<NormStats>& stats = std::nullopt);

// Inverse of normalize() with the same stats (zero-range channels excepted).
MultiDeviceDataset denormalize(const MultiDeviceDataset& ds, const NormStats& stats);

// ---------------------------------------------------------------------------
// On-disk layout
//
//   <root>/manifest              key = value text (name, channels, rate, ...)
//   <root>/data/<device>.csv     timestamp,ax,ay,az,gx,gy,gz
//   <root>/labels.csv            timestamp,label,subject
//   <root>/windows/<device>.f32  row-major [T, W, C] little-endian float32
//   <root>/windows/<device>.shape  sidecar: dims + dtype + order
//   <root>/windows/meta.csv      window,label,subject
// ---------------------------------------------------------------------------

void save_dataset(const MultiDeviceDataset& ds, const std::string& root_path);
MultiDeviceDataset load_dataset(const std::string& root_path);

void save_raw(const RawRecording& rec, const std::string& root_path);
RawRecording load_raw(const std::string& root_path);

// ---------------------------------------------------------------------------
// Splits and label subsets
// ---------------------------------------------------------------------------

struct GroupFold {
    std::vector<int> train_subjects;
    std::vector<int> heldout_subjects;
};

// Partitions the distinct subjects into num_groups nearly equal groups
// (seeded shuffle, round-robin) and enumerates each group as held-out once.
std::vector<GroupFold> split_groups(const MultiDeviceDataset& ds, int num_groups,
                                    std::uint64_t seed);

// Selects windows whose subject is in `subjects`, preserving window order.
MultiDeviceDataset subset_by_subjects(const MultiDeviceDataset& ds,
                                      const std::vector<int>& subjects,
                                      const std::string& split_tag);

// Stratified labeled subset: |indices| = round(fraction * labeled windows)
// spread per class by largest remainder, every non-empty class keeps at
// least one window (the total grows if rounding would starve a class).
LabeledSubset sample_label_fraction(const MultiDeviceDataset& ds, const std::string& device_id,
                                    double fraction, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Adapter: RealWorld-style directory trees
//
//   <root>/proband<k>/data/acc_<activity>_<position>.csv
//   <root>/proband<k>/data/gyr_<activity>_<position>.csv
// with header id,attr_time,attr_x,attr_y,attr_z and attr_time in ms.
// Accelerometer and gyroscope are stacked into 6 channels; activity labels
// come from file names; per-activity blocks are re-based onto one
// continuous timeline per subject. Gyroscope samples are linearly
// interpolated onto the accelerometer grid.
// ---------------------------------------------------------------------------

RawRecording load_realworld(const std::string& root_path);

}  // namespace collossl::data
