#pragma once

// Remote (simulated rig) and local (rendering pipeline) node logic, free of
// any transport. The serve-* commands wrap these in sockets and a fixed-rate
// loop; the episode harness drives them directly.

#include <array>
#include <chrono>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <thread>
#include <vector>

#include "tiltxter/model.hpp"
#include "tiltxter/render.hpp"
#include "tiltxter/sensor_sim.hpp"
#include "tiltxter/wire.hpp"

namespace tiltxter::net {

inline constexpr double kTickHz = 60.0;
inline constexpr double kTickSeconds = 1.0 / kTickHz;
inline constexpr auto kTickPeriod = std::chrono::microseconds(16'667);

/// Line orientation difference folded into (-90, 90].
double wrap_line_angle(double deg);

/// Nearest class angle; ties go to the smaller magnitude.
TiltClass snap_to_class(double relative_deg);

/// Latest-value slot: writers overwrite, the reader takes whatever is newest.
template <typename T>
class Mailbox {
public:
    void put(T v) {
        std::lock_guard lock(mu_);
        if (value_) ++overwritten_;
        value_ = std::move(v);
    }
    std::optional<T> take() {
        std::lock_guard lock(mu_);
        auto v = std::move(value_);
        value_.reset();
        return v;
    }
    std::uint64_t overwritten() const {
        std::lock_guard lock(mu_);
        return overwritten_;
    }

private:
    mutable std::mutex mu_;
    std::optional<T> value_;
    std::uint64_t overwritten_ = 0;
};

struct RemoteConfig {
    double holder_tilt_deg = 90.0;
    double initial_orientation_deg = 0.0;
    double slew_deg_per_s = 90.0;
    int initial_gripper_pos = 15;
    sim::ContactParams contact{};
};

struct GraspOutcome {
    double relative_deg = 0.0;
    bool success = false;
};

inline constexpr double kGraspToleranceDeg = 15.0;

class RemoteNode {
public:
    explicit RemoteNode(RemoteConfig cfg);

    /// Applies the newest pending command, slews one tick and emits the
    /// quantized sensor frames for the current relative angle.
    wire::SensorPair tick(std::optional<wire::Command> latest, std::uint64_t t_us);

    double orientation() const { return orientation_; }
    double target() const { return target_; }
    int gripper_pos() const { return gripper_pos_; }
    /// Holder tilt minus TCP orientation, folded into (-90, 90].
    double relative_angle() const;
    const std::optional<GraspOutcome>& last_grasp() const { return last_grasp_; }

private:
    void apply(const wire::Command& c);

    RemoteConfig cfg_;
    double orientation_;
    double target_;
    int gripper_pos_;
    std::uint32_t seq_ = 0;
    std::optional<GraspOutcome> last_grasp_;
};

enum class Stage : std::size_t { Decode, Downsize, Inference, MaskEncode, Encode, Total, Count };

/// Per-stage latency samples in microseconds.
class LatencyStats {
public:
    void record(Stage s, double us) { samples_[static_cast<std::size_t>(s)].push_back(us); }
    /// Linear-interpolated percentile, q in [0, 100].
    double percentile(Stage s, double q) const;
    std::size_t count(Stage s) const { return samples_[static_cast<std::size_t>(s)].size(); }
    void clear();

private:
    std::array<std::vector<double>, static_cast<std::size_t>(Stage::Count)> samples_;
};

const char* stage_name(Stage s);

struct LocalConfig {
    FeedbackMode mode = FeedbackMode::CnnPattern;
    std::shared_ptr<const nn::Model> model;  // copied per node; may be null
};

class LocalNode {
public:
    explicit LocalNode(LocalConfig cfg);

    /// Renders one SensorPair into an Electrode with the same seq. A missing
    /// model in pattern mode yields zero intensities, predicted = 255, and
    /// counts a fault.
    wire::Electrode tick(const wire::SensorPair& in);
    /// Decode, tick and encode, timing every stage.
    std::vector<std::uint8_t> tick_bytes(std::span<const std::uint8_t> frame);

    void apply(const wire::Command& c) { mode_ = c.mode; }
    void set_mode(FeedbackMode m) { mode_ = m; }
    FeedbackMode mode() const { return mode_; }

    const LatencyStats& stats() const { return stats_; }
    LatencyStats& stats() { return stats_; }
    std::uint64_t faults() const { return faults_; }
    std::optional<TiltClass> last_prediction() const { return last_prediction_; }

private:
    wire::Electrode run(const wire::SensorPair& in, double decode_us);

    FeedbackMode mode_;
    std::unique_ptr<nn::Model> model_;
    LatencyStats stats_;
    std::uint64_t faults_ = 0;
    std::optional<TiltClass> last_prediction_;
};

/// Runs `fn` once per period until it returns false. A tick that overruns
/// skips the missed boundaries instead of queueing them.
class FixedRateLoop {
public:
    explicit FixedRateLoop(std::chrono::microseconds period) : period_(period) {}

    template <typename Fn>
    void run(Fn&& fn) {
        using clock = std::chrono::steady_clock;
        auto next = clock::now();
        while (true) {
            if (!fn()) return;
            next += period_;
            const auto now = clock::now();
            if (now > next) {
                ++overruns_;
                const auto behind = (now - next) / period_ + 1;
                next += period_ * behind;
            }
            std::this_thread::sleep_until(next);
        }
    }

    std::uint64_t overruns() const { return overruns_; }

private:
    std::chrono::microseconds period_;
    std::uint64_t overruns_ = 0;
};

std::uint64_t now_us();

}  // namespace tiltxter::net
