#include "tiltxter/render.hpp"

#include <cmath>
#include <numbers>

#include "tiltxter/resample.hpp"
#include "tiltxter/train.hpp"

namespace tiltxter::render {

namespace {

// Row offsets: center row 2, half-away-from-zero rounding (odd-symmetric).
int row_of(double dr) { return 2 + static_cast<int>(std::round(dr)); }

// Column offsets from the center line between columns 1 and 2.
int col_of(double dc) { return dc >= 0.0 ? 2 + static_cast<int>(std::floor(dc)) : 1 - static_cast<int>(std::floor(-dc)); }

}  // namespace

PatternMask rasterize_line(double angle_deg) {
    // Exact values on the axes, so a vertical line has no sideways drift.
    double s = 0.0, c = 0.0;
    if (std::fmod(angle_deg, 90.0) == 0.0) {
        const int quarter = ((static_cast<int>(angle_deg / 90.0) % 4) + 4) % 4;
        constexpr int kSin[] = {0, 1, 0, -1}, kCos[] = {1, 0, -1, 0};
        s = kSin[quarter];
        c = kCos[quarter];
    } else {
        const double rad = angle_deg * std::numbers::pi / 180.0;
        s = std::sin(rad);
        c = std::cos(rad);
    }
    PatternMask m;
    auto mark = [&m](int r, int col) {
        if (r >= 0 && r < 5 && col >= 0 && col < 4) m(static_cast<std::size_t>(r), static_cast<std::size_t>(col)) = true;
    };
    constexpr int kSteps = 600;
    constexpr double kReach = 6.0;
    for (int k = -kSteps; k <= kSteps; ++k) {
        const double t = kReach * k / kSteps;
        const double dr = -(t * s);  // rows grow downward
        const double dc = t * c;
        const int r = row_of(dr);
        if (dc == 0.0) {
            // On the boundary between the two center columns: both are nearest.
            mark(r, 1);
            mark(r, 2);
        } else {
            mark(r, col_of(dc));
        }
    }
    return m;
}

PatternBank build_bank() {
    PatternBank bank;
    for (int k = 0; k < TiltClass::kCount; ++k) {
        const auto tilt = TiltClass::from_index(k);
        auto& e = bank.entries_[static_cast<std::size_t>(k)];
        e.index_finger = rasterize_line(tilt.degrees());
        e.thumb = mirror_columns(e.index_finger);
    }
    return bank;
}

const PatternBank& default_bank() {
    static const PatternBank bank = build_bank();
    return bank;
}

DownsizedFrame apply_mask(const DownsizedFrame& d, const PatternMask& m) {
    DownsizedFrame out;
    for (std::size_t i = 0; i < d.cells.size(); ++i)
        out.cells[i] = (m.cells[i] && in_contact(d.cells[i])) ? d.cells[i] : 0.0;
    return out;
}

std::uint8_t encode_intensity(double v) {
    if (!(v >= kContactThresholdN)) return 0;
    const double level = 64.0 + (std::min(v, kMaxForceN) - 1.0) / 8.0 * 191.0;
    return static_cast<std::uint8_t>(std::lround(level));
}

ElectrodeFrame encode_electrode(const DownsizedFrame& d) {
    ElectrodeFrame e;
    for (std::size_t i = 0; i < d.cells.size(); ++i) e.intensities.cells[i] = encode_intensity(d.cells[i]);
    return e;
}

FeedbackFrames render_pattern(const BiFrame& frame, TiltClass tilt, const PatternBank& bank) {
    const auto [left, right] = resample::downsize_pair(frame);
    const auto& masks = bank[tilt];
    FeedbackFrames out;
    out.right = encode_electrode(apply_mask(right, masks.index_finger));
    // The left frame is stored in index-finger orientation; the thumb pad
    // receives it mirrored back.
    out.left = encode_electrode(apply_mask(mirror_columns(left), masks.thumb));
    out.predicted = tilt;
    return out;
}

FeedbackFrames render_feedback(FeedbackMode mode, const BiFrame& frame, nn::Model* model, const PatternBank& bank) {
    switch (mode) {
        case FeedbackMode::None: return {};
        case FeedbackMode::Downsized: {
            const auto [left, right] = resample::downsize_pair(frame);
            FeedbackFrames out;
            out.right = encode_electrode(right);
            out.left = encode_electrode(mirror_columns(left));
            return out;
        }
        case FeedbackMode::CnnPattern: {
            if (model == nullptr) throw DomainError("pattern feedback requires a trained model");
            const auto pred = nn::predict_tilt(*model, frame);
            auto out = render_pattern(frame, pred.tilt, bank);
            out.confidence = pred.confidence;
            return out;
        }
    }
    return {};
}

}  // namespace tiltxter::render
