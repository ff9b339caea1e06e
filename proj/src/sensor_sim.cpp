#include "tiltxter/sensor_sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "tiltxter/bytes.hpp"

namespace tiltxter::sim {

namespace {

// sin/cos with exact values at multiples of 90 degrees so that +-90 bands
// rasterize bit-identically.
std::pair<double, double> sincos_deg(double deg) {
    const double quarter = deg / 90.0;
    if (quarter == std::nearbyint(quarter)) {
        const int q = ((static_cast<int>(quarter) % 4) + 4) % 4;
        constexpr double s[4] = {0.0, 1.0, 0.0, -1.0};
        constexpr double c[4] = {1.0, 0.0, -1.0, 0.0};
        return {s[q], c[q]};
    }
    const double rad = deg * std::numbers::pi / 180.0;
    return {std::sin(rad), std::cos(rad)};
}

constexpr double kGridCenter = 4.5;

}  // namespace

void ContactParams::validate() const {
    if (!(base_width > 0.0)) throw DomainError("base_width must be > 0");
    if (width_gain < 0.0) throw DomainError("width_gain must be >= 0");
    if (!(noise_sigma >= 0.0)) throw DomainError("noise_sigma must be >= 0");
    if (offset_jitter < 0.0) throw DomainError("offset_jitter must be >= 0");
    if (force_gain.at_max_closure > kMaxForceN || force_gain.at_min_closure < 0.0 ||
        force_gain.at_max_closure < force_gain.at_min_closure)
        throw DomainError("force gain curve must be monotone within [0, 9] N");
}

ForceGrid rasterize_band(const Band& band) {
    const auto [s, c] = sincos_deg(band.angle_deg);
    const double inv_two_var = 1.0 / (2.0 * band.sigma * band.sigma);
    ForceGrid g;
    for (std::size_t r = 0; r < 10; ++r) {
        const double y = kGridCenter - static_cast<double>(r) - band.center.y;
        for (std::size_t col = 0; col < 10; ++col) {
            const double x = static_cast<double>(col) - kGridCenter - band.center.x;
            const double d = c * y - s * x;
            g(r, col) = band.amplitude * std::exp(-d * d * inv_two_var);
        }
    }
    return g;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    auto mix = [](std::uint64_t z) {
        z += 0x9E3779B97F4A7C15ULL;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    };
    std::uint64_t h = mix(seed);
    h = mix(h ^ a);
    h = mix(h ^ b);
    h = mix(h ^ c);
    return h;
}

BiFrame render_contact(TiltClass tilt, int gripper_pos, const ContactParams& params,
                       std::uint64_t sample_seed) {
    check_gripper_pos(gripper_pos);
    params.validate();

    std::mt19937_64 rng(derive_seed(params.rng_seed, sample_seed));
    std::uniform_real_distribution<double> jitter(-1.0, 1.0);
    const double jx = params.offset_jitter * jitter(rng);
    const double jy = params.offset_jitter * jitter(rng);

    Band band;
    band.angle_deg = tilt.degrees();
    band.center = {params.center_offset.x + jx, params.center_offset.y + jy};
    band.sigma = params.base_width + params.width_gain * gripper_pos;
    band.amplitude = params.force_gain(gripper_pos);

    // The left pad faces the right one, so it sees the mirrored band.
    Band left_band = band;
    left_band.angle_deg = -band.angle_deg;
    left_band.center.x = -band.center.x;

    BiFrame out;
    out.gripper_pos = gripper_pos;
    out.label = tilt;
    out.right = SensorFrame{Finger::Right, rasterize_band(band)};
    SensorFrame left_raw{Finger::Left, rasterize_band(left_band)};

    std::normal_distribution<double> noise(0.0, 1.0);
    auto finish = [&](ForceGrid& g) {
        for (auto& v : g.cells) {
            if (params.noise_sigma > 0.0) v += params.noise_sigma * noise(rng);
            v = std::clamp(v, 0.0, kMaxForceN);
        }
    };
    finish(out.right.forces);
    finish(left_raw.forces);
    out.left = flip_left(left_raw);
    return out;
}

std::vector<DatasetRecord> gen_dataset(const ContactParams& params, int reps_per_cell) {
    if (reps_per_cell < 1) throw DomainError("reps_per_cell must be >= 1");
    params.validate();
    std::vector<DatasetRecord> out;
    out.reserve(static_cast<std::size_t>(TiltClass::kCount) * kGripperPositions * reps_per_cell);
    std::uint32_t id = 0;
    for (int k = 0; k < TiltClass::kCount; ++k) {
        const auto tilt = TiltClass::from_index(k);
        for (int pos = 0; pos < kGripperPositions; ++pos) {
            for (int rep = 0; rep < reps_per_cell; ++rep) {
                const auto stream = derive_seed(0, static_cast<std::uint64_t>(k),
                                                static_cast<std::uint64_t>(pos),
                                                static_cast<std::uint64_t>(rep));
                out.push_back({render_contact(tilt, pos, params, stream), tilt, pos, id++});
            }
        }
    }
    return out;
}

Split split_dataset(std::span<const DatasetRecord> records, std::uint64_t seed) {
    std::vector<std::vector<std::size_t>> by_class(TiltClass::kCount);
    for (std::size_t i = 0; i < records.size(); ++i)
        by_class[static_cast<std::size_t>(records[i].label.index())].push_back(i);

    std::vector<std::size_t> train_idx, val_idx, test_idx;
    for (std::size_t k = 0; k < by_class.size(); ++k) {
        auto& idx = by_class[k];
        std::mt19937_64 rng(derive_seed(seed, 0x5417, k));
        std::shuffle(idx.begin(), idx.end(), rng);
        const std::size_t n = idx.size();
        const std::size_t n_train = n / 2;
        const std::size_t n_val = (n - n_train + 1) / 2;
        train_idx.insert(train_idx.end(), idx.begin(), idx.begin() + n_train);
        val_idx.insert(val_idx.end(), idx.begin() + n_train, idx.begin() + n_train + n_val);
        test_idx.insert(test_idx.end(), idx.begin() + n_train + n_val, idx.end());
    }

    auto gather = [&](std::vector<std::size_t>& idx) {
        std::sort(idx.begin(), idx.end());
        std::vector<DatasetRecord> v;
        v.reserve(idx.size());
        for (auto i : idx) v.push_back(records[i]);
        return v;
    };
    return Split{gather(train_idx), gather(val_idx), gather(test_idx)};
}

void quantize_in_place(std::vector<DatasetRecord>& records) {
    for (auto& r : records) {
        for (auto* g : {&r.biframe.left.forces, &r.biframe.right.forces})
            for (auto& v : g->cells) v = dequantize_force(quantize_force(v));
    }
}

std::vector<std::uint8_t> encode_dataset(std::span<const DatasetRecord> records) {
    std::vector<std::uint8_t> out;
    out.reserve(10 + records.size() * 206);
    ByteWriter w(out);
    w.raw("TXDS");
    w.u16(kDatasetVersion);
    w.u32(static_cast<std::uint32_t>(records.size()));
    for (const auto& r : records) {
        w.u8(static_cast<std::uint8_t>(r.label.index()));
        w.u8(static_cast<std::uint8_t>(r.gripper_pos));
        w.u32(r.sample_id);
        for (double v : r.biframe.left.forces.cells) w.u8(quantize_force(v));
        for (double v : r.biframe.right.forces.cells) w.u8(quantize_force(v));
    }
    return out;
}

std::vector<DatasetRecord> decode_dataset(std::span<const std::uint8_t> bytes) {
    ByteReader r(bytes);
    std::uint8_t magic[4];
    r.bytes(magic);
    if (std::string_view(reinterpret_cast<const char*>(magic), 4) != "TXDS")
        throw FormatError("bad dataset magic", 0);
    const auto version = r.u16();
    if (version != kDatasetVersion)
        throw FormatError("unsupported dataset version " + std::to_string(version), 4);
    const auto count = r.u32();
    if (r.remaining() != static_cast<std::size_t>(count) * 206)
        throw FormatError("dataset size does not match record count " + std::to_string(count), r.position());

    std::vector<DatasetRecord> out;
    out.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto at = r.position();
        DatasetRecord rec;
        const int label = r.u8();
        const int pos = r.u8();
        if (label >= TiltClass::kCount) throw FormatError("label out of range", at);
        if (pos > kMaxGripperPos) throw FormatError("gripper_pos out of range", at + 1);
        rec.label = TiltClass::from_index(label);
        rec.gripper_pos = pos;
        rec.sample_id = r.u32();
        rec.biframe.gripper_pos = pos;
        rec.biframe.label = rec.label;
        for (auto* g : {&rec.biframe.left.forces, &rec.biframe.right.forces})
            for (auto& v : g->cells) v = dequantize_force(r.u8());
        out.push_back(rec);
    }
    return out;
}

void save_dataset(const std::string& path, std::span<const DatasetRecord> records) {
    write_file(path, encode_dataset(records));
}

std::vector<DatasetRecord> load_dataset(const std::string& path) { return decode_dataset(read_file(path)); }

}  // namespace tiltxter::sim
