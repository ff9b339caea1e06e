#pragma once

// Synthetic contact model for a tilted deformable pipette pressed between
// two tactile pads, and the labeled dataset built from it.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tiltxter/core.hpp"

namespace tiltxter::sim {

struct Offset {
    double x = 0.0;  // taxels, toward higher column index
    double y = 0.0;  // taxels, toward the distal edge (row 0)
};

/// Affine closure -> peak pressure map.
struct ForceGainCurve {
    double at_min_closure = 1.0;
    double at_max_closure = 8.0;

    double operator()(int gripper_pos) const {
        return at_min_closure + (at_max_closure - at_min_closure) * gripper_pos / double(kMaxGripperPos);
    }
};

struct ContactParams {
    Offset center_offset{};
    double offset_jitter = 0.75;  // uniform +-, taxels
    double base_width = 0.6;      // Gaussian sigma at closure 0, taxels
    double width_gain = 0.012;    // taxels per closure step
    ForceGainCurve force_gain{};
    double noise_sigma = 0.15;
    std::uint64_t rng_seed = 0;

    void validate() const;
};

/// One straight Gaussian band, already resolved to concrete numbers.
struct Band {
    double angle_deg = 0.0;  // 0 = horizontal, +90 = vertical, counter-clockwise positive
    Offset center{};
    double sigma = 1.0;
    double amplitude = 1.0;
};

/// Noise-free band evaluated at every taxel (no clamping).
ForceGrid rasterize_band(const Band& band);

/// Renders both fingers for one contact. The left frame is produced in
/// left-finger coordinates and mirrored through flip_left. Deterministic in
/// (tilt, gripper_pos, params, sample_seed).
BiFrame render_contact(TiltClass tilt, int gripper_pos, const ContactParams& params,
                       std::uint64_t sample_seed);

/// splitmix64-style mixing of a seed with stream coordinates.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0);

struct DatasetRecord {
    BiFrame biframe;
    TiltClass label;
    int gripper_pos = 0;
    std::uint32_t sample_id = 0;
};

inline constexpr int kDefaultRepsPerCell = 32;

/// 9 classes x 31 closures x reps_per_cell, class-major.
std::vector<DatasetRecord> gen_dataset(const ContactParams& params, int reps_per_cell = kDefaultRepsPerCell);

struct Split {
    std::vector<DatasetRecord> train;
    std::vector<DatasetRecord> val;
    std::vector<DatasetRecord> test;
};

/// Stratified 50/25/25 split. Per class: train = floor(n/2), val gets the
/// rounding remainder (ceil of half the rest), test the rest.
Split split_dataset(std::span<const DatasetRecord> records, std::uint64_t seed);

/// Forces pass through quantize_force/dequantize_force, as after a file
/// round trip.
void quantize_in_place(std::vector<DatasetRecord>& records);

// Dataset file: "TXDS", u16 version, u32 count, then per record
// u8 label, u8 gripper_pos, u32 sample_id, 100 B left, 100 B right.
inline constexpr std::uint16_t kDatasetVersion = 1;

std::vector<std::uint8_t> encode_dataset(std::span<const DatasetRecord> records);
std::vector<DatasetRecord> decode_dataset(std::span<const std::uint8_t> bytes);
void save_dataset(const std::string& path, std::span<const DatasetRecord> records);
std::vector<DatasetRecord> load_dataset(const std::string& path);

}  // namespace tiltxter::sim
