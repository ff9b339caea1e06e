#include "tiltxter/episode.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace tiltxter::net {

AgentKind parse_agent_kind(std::string_view name) {
    if (name == "oracle") return AgentKind::Oracle;
    if (name == "blind") return AgentKind::Blind;
    if (name == "noisy") return AgentKind::Noisy;
    throw DomainError("unknown agent: " + std::string(name));
}

std::string_view to_string(AgentKind k) {
    switch (k) {
        case AgentKind::Oracle: return "oracle";
        case AgentKind::Blind: return "blind";
        case AgentKind::Noisy: return "noisy";
    }
    return "?";
}

namespace {

// Orientation target folded into [-90, 90]; lines repeat every 180 deg.
double fold_target(double deg) {
    while (deg > 90.0) deg -= 180.0;
    while (deg < -90.0) deg += 180.0;
    return deg;
}

class BlindAgent final : public Agent {
public:
    explicit BlindAgent(AgentConfig cfg) : cfg_(cfg) {}

    void reset(double initial_orientation, std::uint64_t) override { orientation_ = initial_orientation; }

    std::optional<wire::Command> act(const Observation&) override {
        wire::Command c;
        c.target_tilt_deg = static_cast<std::int16_t>(std::lround(orientation_));
        c.gripper_pos = static_cast<std::uint8_t>(cfg_.gripper_pos);
        c.mode = cfg_.mode;
        c.grasp = true;
        return c;
    }

private:
    AgentConfig cfg_;
    double orientation_ = 0.0;
};

// Probe, integrate an estimate over a window, rotate to cancel it, repeat;
// grasp once the estimate is within tolerance or the budget is spent.
class SteeringAgent : public Agent {
public:
    explicit SteeringAgent(AgentConfig cfg, int window) : cfg_(cfg), window_(std::max(1, window)) {}

    void reset(double initial_orientation, std::uint64_t seed) override {
        commanded_ = initial_orientation;
        rng_.seed(seed);
        corrections_ = 0;
        settle_until_ = 3;
        started_ = false;
        votes_.clear();
    }

    std::optional<wire::Command> act(const Observation& obs) override {
        if (!started_) {
            started_ = true;
            return command(false);
        }
        if (obs.tick < settle_until_) return std::nullopt;

        votes_.push_back(estimate(obs.electrode));
        if (static_cast<int>(votes_.size()) < window_) return std::nullopt;
        const auto est = majority(votes_);
        votes_.clear();

        if (!est || std::fabs(*est) <= kGraspToleranceDeg || corrections_ >= cfg_.max_corrections)
            return command(true);

        const double next = fold_target(commanded_ + *est);
        const double travel = std::fabs(next - commanded_);
        commanded_ = next;
        ++corrections_;
        settle_until_ = obs.tick + static_cast<int>(std::ceil(travel / (90.0 * kTickSeconds))) + 3;
        return command(false);
    }

protected:
    virtual std::optional<double> estimate(const wire::Electrode& e) = 0;
    std::mt19937_64& rng() { return rng_; }

private:
    wire::Command command(bool grasp) const {
        wire::Command c;
        c.target_tilt_deg = static_cast<std::int16_t>(std::lround(commanded_));
        c.gripper_pos = static_cast<std::uint8_t>(cfg_.gripper_pos);
        c.mode = cfg_.mode;
        c.grasp = grasp;
        return c;
    }

    // Most frequent estimate; "nothing felt" wins only with a strict majority.
    static std::optional<double> majority(const std::vector<std::optional<double>>& votes) {
        std::map<int, int> counts;
        int none = 0;
        for (const auto& v : votes) {
            if (v)
                ++counts[static_cast<int>(std::lround(*v))];
            else
                ++none;
        }
        if (counts.empty() || none * 2 > static_cast<int>(votes.size())) return std::nullopt;
        auto best = counts.begin();
        for (auto it = counts.begin(); it != counts.end(); ++it) {
            if (it->second > best->second ||
                (it->second == best->second && std::abs(it->first) < std::abs(best->first)))
                best = it;
        }
        return static_cast<double>(best->first);
    }

    AgentConfig cfg_;
    int window_;
    double commanded_ = 0.0;
    std::mt19937_64 rng_;
    int corrections_ = 0;
    int settle_until_ = 0;
    bool started_ = false;
    std::vector<std::optional<double>> votes_;
};

class OracleAgent final : public SteeringAgent {
public:
    explicit OracleAgent(AgentConfig cfg) : SteeringAgent(cfg, 1) {}

protected:
    std::optional<double> estimate(const wire::Electrode& e) override {
        if (e.predicted == wire::kNoPrediction) return std::nullopt;
        return TiltClass::from_index(e.predicted).degrees();
    }
};

class NoisyAgent final : public SteeringAgent {
public:
    explicit NoisyAgent(AgentConfig cfg) : SteeringAgent(cfg, cfg.integrate_ticks), cfg_(cfg) {}

protected:
    std::optional<double> estimate(const wire::Electrode& e) override {
        return perceive_tilt(e, cfg_.perception, &rng());
    }

private:
    AgentConfig cfg_;
};

}  // namespace

std::optional<double> perceive_tilt(const wire::Electrode& e, const Perception& p, std::mt19937_64* rng) {
    std::normal_distribution<double> noise(0.0, 1.0);

    // Both pads in index-finger orientation; the thumb pad is mirrored.
    Grid<double, 5, 4> stim;
    for (std::size_t r = 0; r < 5; ++r)
        for (std::size_t c = 0; c < 4; ++c)
            stim(r, c) = 0.5 * (e.right[r * 4 + c] + e.left[r * 4 + (3 - c)]) / 255.0;

    PatternMask felt;
    int felt_count = 0;
    for (std::size_t r = 0; r < 5; ++r) {
        for (std::size_t c = 0; c < 4; ++c) {
            double v = stim(r, c);
            if (r > 0) v += p.spread * stim(r - 1, c);
            if (r < 4) v += p.spread * stim(r + 1, c);
            if (c > 0) v += p.spread * stim(r, c - 1);
            if (c < 3) v += p.spread * stim(r, c + 1);
            if (v <= 0.0) continue;
            if (rng && p.sigma > 0.0) v += p.sigma * noise(*rng);
            const bool on = v > p.threshold;
            felt(r, c) = on;
            felt_count += on;
        }
    }
    if (felt_count == 0) return std::nullopt;

    const auto& bank = render::default_bank();
    double best_score = -1.0;
    int best_deg = 0;
    for (int k = 0; k < TiltClass::kCount; ++k) {
        const auto tilt = TiltClass::from_index(k);
        const auto& mask = bank[tilt].index_finger;
        int inter = 0, uni = 0;
        for (std::size_t i = 0; i < mask.cells.size(); ++i) {
            inter += felt.cells[i] && mask.cells[i];
            uni += felt.cells[i] || mask.cells[i];
        }
        const double score = uni ? static_cast<double>(inter) / uni : 0.0;
        if (score > best_score + 1e-12 ||
            (std::fabs(score - best_score) <= 1e-12 && std::abs(tilt.degrees()) < std::abs(best_deg))) {
            best_score = score;
            best_deg = tilt.degrees();
        }
    }
    return static_cast<double>(best_deg);
}

std::unique_ptr<Agent> make_agent(AgentKind kind, const AgentConfig& cfg) {
    switch (kind) {
        case AgentKind::Oracle: return std::make_unique<OracleAgent>(cfg);
        case AgentKind::Blind: return std::make_unique<BlindAgent>(cfg);
        case AgentKind::Noisy: return std::make_unique<NoisyAgent>(cfg);
    }
    throw DomainError("unknown agent kind");
}

EpisodeResult run_episode(Agent& agent, const EpisodeConfig& cfg) {
    RemoteConfig rc;
    rc.holder_tilt_deg = cfg.holder_tilt_deg;
    rc.initial_orientation_deg = fold_target(wrap_line_angle(cfg.holder_tilt_deg - cfg.initial_offset_deg));
    rc.contact = cfg.contact;
    RemoteNode remote(rc);
    LocalNode local({cfg.mode, cfg.model});
    agent.reset(remote.orientation(), cfg.agent_seed);

    wire::SeqCounter seqs;
    std::optional<wire::Command> pending;
    double commanded = remote.orientation();
    for (int tick = 1; tick <= cfg.tick_limit; ++tick) {
        const auto t_us = static_cast<std::uint64_t>(tick) * 16'667;
        const auto sp = remote.tick(std::exchange(pending, std::nullopt), t_us);
        const auto ebytes = local.tick_bytes(wire::encode_msg(sp));
        const auto e = std::get<wire::Electrode>(wire::decode_msg(ebytes));

        auto cmd = agent.act({tick, e, commanded});
        if (!cmd) continue;
        cmd->seq = seqs.next(wire::Tag::Command);
        cmd->t_us = t_us;
        local.apply(*cmd);
        commanded = cmd->target_tilt_deg;
        if (cmd->grasp) {
            const double rel = remote.relative_angle();
            return {std::fabs(rel) <= kGraspToleranceDeg, tick, rel, true};
        }
        pending = cmd;
    }
    return {false, cfg.tick_limit, remote.relative_angle(), false};
}

TrialSummary run_trials(AgentKind kind, const AgentConfig& acfg, int trials, std::uint64_t seed,
                        std::shared_ptr<const nn::Model> model, const sim::ContactParams& contact,
                        double holder_tilt_deg) {
    auto agent = make_agent(kind, acfg);
    std::mt19937_64 rng(sim::derive_seed(seed, 0xE915));
    std::uniform_int_distribution<std::size_t> pick(0, kInitialOffsets.size() - 1);

    TrialSummary s;
    double ticks = 0.0;
    for (int i = 0; i < trials; ++i) {
        EpisodeConfig ec;
        ec.holder_tilt_deg = holder_tilt_deg;
        ec.initial_offset_deg = kInitialOffsets[pick(rng)];
        ec.mode = acfg.mode;
        ec.model = model;
        ec.contact = contact;
        ec.contact.rng_seed = sim::derive_seed(seed, 0x51, static_cast<std::uint64_t>(i));
        ec.agent_seed = sim::derive_seed(seed, 0xA6, static_cast<std::uint64_t>(i));
        const auto r = run_episode(*agent, ec);
        ++s.trials;
        s.successes += r.success;
        ticks += r.ticks_used;
    }
    s.mean_ticks = trials ? ticks / trials : 0.0;
    return s;
}

}  // namespace tiltxter::net
