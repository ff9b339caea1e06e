#pragma once

// Closed-loop grasp episodes: a scripted operator steers the TCP orientation
// from electrode feedback, then commands a grasp.

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string_view>

#include "tiltxter/nodes.hpp"

namespace tiltxter::net {

inline constexpr int kEpisodeTickLimit = 600;  // 10 s at 60 Hz
inline constexpr std::array<int, 7> kInitialOffsets{-90, -60, -30, 0, 30, 60, 90};

/// What the operator has at hand on one tick: the rendered stimulus and the
/// master device's own pose (proprioception).
struct Observation {
    int tick = 0;
    wire::Electrode electrode;
    double commanded_orientation = 0.0;
};

class Agent {
public:
    virtual ~Agent() = default;
    virtual void reset(double initial_orientation, std::uint64_t seed) = 0;
    /// A command to send this tick, if any. A grasp-flagged command ends the
    /// episode.
    virtual std::optional<wire::Command> act(const Observation& obs) = 0;
};

enum class AgentKind { Oracle, Blind, Noisy };
AgentKind parse_agent_kind(std::string_view name);
std::string_view to_string(AgentKind k);

/// Noisy fingertip perception of one electrode frame pair. Each electrode's
/// normalized intensity leaks into its 4-neighbours (current spread), gets
/// Gaussian noise where anything is stimulated, and is felt above the
/// threshold. Unstimulated skin never produces a sensation.
struct Perception {
    double sigma = 0.2;
    double threshold = 0.35;
    double spread = 0.25;
};

struct AgentConfig {
    int gripper_pos = 18;
    FeedbackMode mode = FeedbackMode::CnnPattern;
    int max_corrections = 3;
    int integrate_ticks = 3;  // frames pooled per decision
    Perception perception{};
};

std::unique_ptr<Agent> make_agent(AgentKind kind, const AgentConfig& cfg = {});

/// Estimates the relative tilt (deg) from one frame pair as an operator
/// trained on the pattern bank would: the felt cell set is matched against
/// every class mask. nullopt when nothing is felt. A null rng disables noise.
std::optional<double> perceive_tilt(const wire::Electrode& e, const Perception& p, std::mt19937_64* rng);

struct EpisodeConfig {
    double holder_tilt_deg = 90.0;
    double initial_offset_deg = 0.0;  // holder tilt minus initial orientation
    FeedbackMode mode = FeedbackMode::CnnPattern;
    std::shared_ptr<const nn::Model> model;
    sim::ContactParams contact{};
    std::uint64_t agent_seed = 0;
    int tick_limit = kEpisodeTickLimit;
};

struct EpisodeResult {
    bool success = false;
    int ticks_used = 0;
    double final_relative_deg = 0.0;
    bool grasped = false;
};

EpisodeResult run_episode(Agent& agent, const EpisodeConfig& cfg);

struct TrialSummary {
    int trials = 0;
    int successes = 0;
    double mean_ticks = 0.0;
    double success_rate() const { return trials ? double(successes) / trials : 0.0; }
};

/// `trials` episodes with initial offsets drawn uniformly from
/// kInitialOffsets. Deterministic in `seed`.
TrialSummary run_trials(AgentKind kind, const AgentConfig& agent, int trials, std::uint64_t seed,
                        std::shared_ptr<const nn::Model> model, const sim::ContactParams& contact = {},
                        double holder_tilt_deg = 90.0);

}  // namespace tiltxter::net
