#include "tiltxter/core.hpp"

#include <algorithm>
#include <cmath>

namespace tiltxter {

TiltClass TiltClass::from_index(int index) {
    if (index < 0 || index >= kCount)
        throw DomainError("tilt class index out of range: " + std::to_string(index));
    return TiltClass(index);
}

TiltClass TiltClass::from_degrees(int degrees) {
    const auto it = std::find(kDegrees.begin(), kDegrees.end(), degrees);
    if (it == kDegrees.end())
        throw DomainError("unknown tilt angle: " + std::to_string(degrees) + " deg");
    return TiltClass(static_cast<int>(it - kDegrees.begin()));
}

TiltClass class_of_degrees(int degrees) { return TiltClass::from_degrees(degrees); }

int degrees_of_class(TiltClass tilt) { return tilt.degrees(); }

FeedbackMode feedback_mode_from_u8(std::uint8_t v) {
    if (v > 2) throw DomainError("feedback mode out of range: " + std::to_string(v));
    return static_cast<FeedbackMode>(v);
}

FeedbackMode parse_feedback_mode(std::string_view name) {
    if (name == "none" || name == "0") return FeedbackMode::None;
    if (name == "downsize" || name == "downsized" || name == "1") return FeedbackMode::Downsized;
    if (name == "pattern" || name == "cnn" || name == "2") return FeedbackMode::CnnPattern;
    throw DomainError("unknown feedback mode: " + std::string(name));
}

std::string_view to_string(FeedbackMode mode) {
    switch (mode) {
        case FeedbackMode::None: return "none";
        case FeedbackMode::Downsized: return "downsize";
        case FeedbackMode::CnnPattern: return "pattern";
    }
    return "?";
}

std::uint8_t quantize_force(double newtons) {
    if (std::isnan(newtons)) return 0;
    const double clamped = std::clamp(newtons, 0.0, kMaxForceN);
    return static_cast<std::uint8_t>(std::lround(clamped / kMaxForceN * 255.0));
}

double dequantize_force(std::uint8_t q) { return q / 255.0 * kMaxForceN; }

SensorFrame flip_left(const SensorFrame& frame) {
    if (frame.finger != Finger::Left)
        throw std::logic_error("flip_left applied to a right-finger frame");
    return SensorFrame{Finger::Left, mirror_columns(frame.forces)};
}

void check_gripper_pos(int gripper_pos) {
    if (gripper_pos < 0 || gripper_pos > kMaxGripperPos)
        throw DomainError("gripper position out of range 0..30: " + std::to_string(gripper_pos));
}

}  // namespace tiltxter
