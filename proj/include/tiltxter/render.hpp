#pragma once

// Electro-tactile rendering: downsized frames, the predefined line pattern
// bank, Boolean masking and intensity encoding.

#include <array>
#include <optional>

#include "tiltxter/core.hpp"
#include "tiltxter/model.hpp"

namespace tiltxter::render {

struct PatternPair {
    PatternMask index_finger;
    PatternMask thumb;  // column mirror of index_finger
};

class PatternBank {
public:
    const PatternPair& operator[](TiltClass tilt) const {
        return entries_[static_cast<std::size_t>(tilt.index())];
    }
    const std::array<PatternPair, TiltClass::kCount>& entries() const { return entries_; }

private:
    friend PatternBank build_bank();
    std::array<PatternPair, TiltClass::kCount> entries_{};
};

/// One-cell-thick line through the center of the 5x4 grid at `angle_deg`
/// (0 = middle row, 90 = the two middle columns), sampled densely with
/// nearest-cell marking. Rounding is odd-symmetric about the center so
/// mirrored angles give mirrored masks.
PatternMask rasterize_line(double angle_deg);

PatternBank build_bank();
/// Lazily built, shared immutable bank.
const PatternBank& default_bank();

/// Keeps d(i,j) where the mask is set and the cell is in contact (>= 1 N).
DownsizedFrame apply_mask(const DownsizedFrame& d, const PatternMask& m);

/// 0 below 1 N, else round(64 + (v - 1) / 8 * 191), saturating at 255.
std::uint8_t encode_intensity(double newtons);
ElectrodeFrame encode_electrode(const DownsizedFrame& d);

struct FeedbackFrames {
    ElectrodeFrame left;   // thumb pad, in the thumb's own column order
    ElectrodeFrame right;  // index-finger pad
    std::optional<TiltClass> predicted;
    double confidence = 0.0;
};

/// None -> zero frames. Downsized -> encoded bicubic downsizing per finger.
/// CnnPattern -> classifier prediction, bank lookup, mask, encode.
/// Throws DomainError when CnnPattern is requested without a model.
FeedbackFrames render_feedback(FeedbackMode mode, const BiFrame& frame, nn::Model* model,
                               const PatternBank& bank = default_bank());

/// Second half of render_feedback for a known class; used when the
/// prediction is made elsewhere.
FeedbackFrames render_pattern(const BiFrame& frame, TiltClass tilt, const PatternBank& bank = default_bank());

}  // namespace tiltxter::render
