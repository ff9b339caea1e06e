#pragma once

// Shared domain types for the tactile pipeline: sensor grids, tilt classes,
// the 5x4 electrode-side grids and the byte quantization used on disk and
// on the wire.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace tiltxter {

/// Raised for out-of-domain arguments (unknown angle, bad closure index, ...).
class DomainError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

inline constexpr double kMaxForceN = 9.0;
inline constexpr double kContactThresholdN = 1.0;
inline constexpr int kMaxGripperPos = 30;
inline constexpr int kGripperPositions = kMaxGripperPos + 1;

/// Fixed-size row-major grid.
template <typename T, std::size_t Rows, std::size_t Cols>
struct Grid {
    static constexpr std::size_t rows = Rows;
    static constexpr std::size_t cols = Cols;
    static constexpr std::size_t size = Rows * Cols;

    std::array<T, Rows * Cols> cells{};

    constexpr T& operator()(std::size_t r, std::size_t c) { return cells[r * Cols + c]; }
    constexpr const T& operator()(std::size_t r, std::size_t c) const { return cells[r * Cols + c]; }

    static constexpr Grid filled(T v) {
        Grid g;
        g.cells.fill(v);
        return g;
    }

    friend bool operator==(const Grid&, const Grid&) = default;
};

using ForceGrid = Grid<double, 10, 10>;

/// Column j <-> Cols-1-j in every row.
template <typename T, std::size_t R, std::size_t C>
Grid<T, R, C> mirror_columns(const Grid<T, R, C>& g) {
    Grid<T, R, C> out;
    for (std::size_t r = 0; r < R; ++r)
        for (std::size_t c = 0; c < C; ++c) out(r, c) = g(r, C - 1 - c);
    return out;
}

enum class Finger : std::uint8_t { Left, Right };

/// One finger's 10x10 taxel forces in newtons. Row 0 is the distal edge,
/// column 0 the leftmost taxel seen from the contact surface.
struct SensorFrame {
    Finger finger = Finger::Right;
    ForceGrid forces{};

    friend bool operator==(const SensorFrame&, const SensorFrame&) = default;
};

/// Nine tilt classes, index ascending with angle.
class TiltClass {
public:
    static constexpr int kCount = 9;
    static constexpr std::array<int, kCount> kDegrees{-90, -60, -45, -30, 0, 30, 45, 60, 90};

    constexpr TiltClass() = default;
    static TiltClass from_index(int index);
    static TiltClass from_degrees(int degrees);

    constexpr int index() const { return index_; }
    constexpr int degrees() const { return kDegrees[static_cast<std::size_t>(index_)]; }

    friend constexpr auto operator<=>(TiltClass, TiltClass) = default;

private:
    constexpr explicit TiltClass(int index) : index_(index) {}
    int index_ = 4;
};

TiltClass class_of_degrees(int degrees);
int degrees_of_class(TiltClass tilt);

/// Left (already mirrored to right-finger orientation) and right frames.
struct BiFrame {
    SensorFrame left{Finger::Left, {}};
    SensorFrame right{Finger::Right, {}};
    int gripper_pos = 0;
    std::optional<TiltClass> label;

    friend bool operator==(const BiFrame&, const BiFrame&) = default;
};

/// 5 rows x 4 columns, matching the electrode pads.
using DownsizedFrame = Grid<double, 5, 4>;
using PatternMask = Grid<bool, 5, 4>;

struct ElectrodeFrame {
    static constexpr int kCarrierHz = 120;
    static constexpr double kMaxCurrentMa = 10.0;

    Grid<std::uint8_t, 5, 4> intensities{};

    double current_ma(std::size_t r, std::size_t c) const {
        return intensities(r, c) / 255.0 * kMaxCurrentMa;
    }
    bool all_off() const {
        for (auto v : intensities.cells)
            if (v != 0) return false;
        return true;
    }

    friend bool operator==(const ElectrodeFrame&, const ElectrodeFrame&) = default;
};

enum class FeedbackMode : std::uint8_t { None = 0, Downsized = 1, CnnPattern = 2 };

FeedbackMode feedback_mode_from_u8(std::uint8_t v);
FeedbackMode parse_feedback_mode(std::string_view name);
std::string_view to_string(FeedbackMode mode);

/// round(clamp(f, 0, 9) / 9 * 255). NaN maps to 0.
std::uint8_t quantize_force(double newtons);
double dequantize_force(std::uint8_t q);

SensorFrame flip_left(const SensorFrame& frame);

inline bool in_contact(double newtons) { return newtons >= kContactThresholdN; }

void check_gripper_pos(int gripper_pos);

}  // namespace tiltxter
