#include "tiltxter/nodes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <spdlog/spdlog.h>

#include "tiltxter/resample.hpp"
#include "tiltxter/train.hpp"

namespace tiltxter::net {

namespace {

using Clock = std::chrono::steady_clock;

double us_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::micro>(Clock::now() - t0).count();
}

}  // namespace

std::uint64_t now_us() {
    return static_cast<std::uint64_t>(
        std::chrono::duration_cast<std::chrono::microseconds>(Clock::now().time_since_epoch()).count());
}

double wrap_line_angle(double deg) {
    double r = std::fmod(deg, 180.0);
    if (r > 90.0) r -= 180.0;
    if (r <= -90.0) r += 180.0;
    return r;
}

TiltClass snap_to_class(double relative_deg) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int k = 0; k < TiltClass::kCount; ++k) {
        const int a = TiltClass::kDegrees[static_cast<std::size_t>(k)];
        const double d = std::fabs(relative_deg - a);
        const int cur = TiltClass::kDegrees[static_cast<std::size_t>(best)];
        if (d < best_d - 1e-9 || (std::fabs(d - best_d) <= 1e-9 && std::abs(a) < std::abs(cur))) {
            best = k;
            best_d = d;
        }
    }
    return TiltClass::from_index(best);
}

RemoteNode::RemoteNode(RemoteConfig cfg)
    : cfg_(std::move(cfg)),
      orientation_(std::clamp(cfg_.initial_orientation_deg, -90.0, 90.0)),
      target_(orientation_),
      gripper_pos_(std::clamp(cfg_.initial_gripper_pos, 0, kMaxGripperPos)) {
    cfg_.contact.validate();
}

double RemoteNode::relative_angle() const { return wrap_line_angle(cfg_.holder_tilt_deg - orientation_); }

void RemoteNode::apply(const wire::Command& c) {
    target_ = std::clamp(static_cast<double>(c.target_tilt_deg), -90.0, 90.0);
    gripper_pos_ = std::clamp(static_cast<int>(c.gripper_pos), 0, kMaxGripperPos);
    if (c.grasp) {
        const double rel = relative_angle();
        last_grasp_ = GraspOutcome{rel, std::fabs(rel) <= kGraspToleranceDeg};
        spdlog::debug("grasp at relative angle {:.1f} deg: {}", rel, last_grasp_->success ? "success" : "miss");
    }
}

wire::SensorPair RemoteNode::tick(std::optional<wire::Command> latest, std::uint64_t t_us) {
    if (latest) apply(*latest);
    const double step = cfg_.slew_deg_per_s * kTickSeconds;
    const double diff = target_ - orientation_;
    orientation_ = std::fabs(diff) <= step ? target_ : orientation_ + std::copysign(step, diff);

    const auto cls = snap_to_class(relative_angle());
    const std::uint32_t seq = seq_++;
    const auto frame = sim::render_contact(cls, gripper_pos_, cfg_.contact, seq);
    return wire::make_sensor_pair(frame, seq, t_us);
}

double LatencyStats::percentile(Stage s, double q) const {
    auto v = samples_[static_cast<std::size_t>(s)];
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const double pos = std::clamp(q, 0.0, 100.0) / 100.0 * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (v[hi] - v[lo]) * (pos - static_cast<double>(lo));
}

void LatencyStats::clear() {
    for (auto& v : samples_) v.clear();
}

const char* stage_name(Stage s) {
    switch (s) {
        case Stage::Decode: return "decode";
        case Stage::Downsize: return "downsize";
        case Stage::Inference: return "inference";
        case Stage::MaskEncode: return "mask+encode";
        case Stage::Encode: return "encode";
        case Stage::Total: return "total";
        case Stage::Count: break;
    }
    return "?";
}

LocalNode::LocalNode(LocalConfig cfg)
    : mode_(cfg.mode), model_(cfg.model ? std::make_unique<nn::Model>(*cfg.model) : nullptr) {}

wire::Electrode LocalNode::run(const wire::SensorPair& in, double decode_us) {
    wire::Electrode out;
    out.seq = in.seq;
    out.t_us = in.t_us;
    last_prediction_.reset();

    double downsize_us = 0, infer_us = 0, mask_us = 0;
    if (mode_ == FeedbackMode::Downsized || mode_ == FeedbackMode::CnnPattern) {
        auto t = Clock::now();
        const BiFrame frame = wire::to_biframe(in);
        const auto [left, right] = resample::downsize_pair(frame);
        downsize_us = us_since(t);

        render::FeedbackFrames ff;
        if (mode_ == FeedbackMode::Downsized) {
            t = Clock::now();
            ff.right = render::encode_electrode(right);
            ff.left = render::encode_electrode(mirror_columns(left));
            mask_us = us_since(t);
        } else if (model_) {
            t = Clock::now();
            const auto pred = nn::predict_tilt(*model_, frame);
            infer_us = us_since(t);
            t = Clock::now();
            const auto& masks = render::default_bank()[pred.tilt];
            ff.right = render::encode_electrode(render::apply_mask(right, masks.index_finger));
            ff.left = render::encode_electrode(render::apply_mask(mirror_columns(left), masks.thumb));
            ff.predicted = pred.tilt;
            mask_us = us_since(t);
        } else {
            ++faults_;
            spdlog::error("pattern feedback requested but no model is loaded (seq {})", in.seq);
        }
        std::copy(ff.left.intensities.cells.begin(), ff.left.intensities.cells.end(), out.left.begin());
        std::copy(ff.right.intensities.cells.begin(), ff.right.intensities.cells.end(), out.right.begin());
        if (ff.predicted) {
            out.predicted = static_cast<std::uint8_t>(ff.predicted->index());
            last_prediction_ = ff.predicted;
        }
    }
    stats_.record(Stage::Decode, decode_us);
    stats_.record(Stage::Downsize, downsize_us);
    stats_.record(Stage::Inference, infer_us);
    stats_.record(Stage::MaskEncode, mask_us);
    return out;
}

wire::Electrode LocalNode::tick(const wire::SensorPair& in) {
    const auto t0 = Clock::now();
    auto out = run(in, 0.0);
    stats_.record(Stage::Encode, 0.0);
    stats_.record(Stage::Total, us_since(t0));
    return out;
}

std::vector<std::uint8_t> LocalNode::tick_bytes(std::span<const std::uint8_t> frame) {
    const auto t0 = Clock::now();
    const auto msg = wire::decode_msg(frame);
    const auto* sp = std::get_if<wire::SensorPair>(&msg);
    if (!sp) throw wire::ProtocolError("local node expects a SensorPair frame", 4);
    const double decode_us = us_since(t0);
    const auto e = run(*sp, decode_us);
    const auto t = Clock::now();
    auto bytes = wire::encode_msg(e);
    stats_.record(Stage::Encode, us_since(t));
    stats_.record(Stage::Total, us_since(t0));
    return bytes;
}

}  // namespace tiltxter::net
