#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "sentinel/gaussian_mixture.hpp"

namespace sentinel {

struct EnvStep {
    Eigen::VectorXd next_state;
    double reward = 0.0;
    bool terminal = false;
    struct Info {
        bool crash = false;  // ego involved in a collision
        bool fall = false;   // cart-pole physics violation
        int episode_steps = 0;
    } info;
};

/// Uniform step/reset interface. Instances own their RNG; a full trajectory
/// is reproducible from (seed, action sequence). Terminal episodes must be
/// reset before stepping again.
class Environment {
public:
    virtual ~Environment() = default;
    virtual int state_dim() const = 0;
    virtual int n_actions() const = 0;
    virtual Eigen::VectorXd reset(std::uint64_t seed) = 0;
    virtual Eigen::VectorXd reset() = 0;  // continue the seeded stream
    virtual EnvStep step(int action) = 0;
};

// --------------------------------------------------------------------------
// Three-state MDP with a multimodal return for a_0.
//
// From s_0, a_0 moves to s_1 or s_2 with probability 1/2 each, paying
// N(1.0, 0.1^2) resp. N(0.95, 0.1^2); a_1 moves to s_2 paying N(0.95, 0.1^2).
// Every episode is a single terminal step.
// --------------------------------------------------------------------------

struct ThreeStateMdpSpec {
    std::vector<double> mixture_weights{0.5, 0.5};
    std::vector<double> means{1.0, 0.95};
    std::vector<double> std_devs{0.1, 0.1};

    /// Ground-truth return model for action a_0 (the weighted mixture).
    GaussianMixtureModel action0_model() const {
        GaussianMixtureModel m;
        m.weights = mixture_weights;
        m.means = means;
        for (double s : std_devs) m.variances.push_back(s * s);
        m.validate();
        return m;
    }

    /// Ground-truth return model for action a_1: N(means[1], std_devs[1]^2).
    GaussianMixtureModel action1_model() const {
        GaussianMixtureModel m;
        m.weights = {1.0};
        m.means = {means[1]};
        m.variances = {std_devs[1] * std_devs[1]};
        m.validate();
        return m;
    }
};

class ThreeStateMdp final : public Environment {
public:
    explicit ThreeStateMdp(ThreeStateMdpSpec spec = {}) : spec_(std::move(spec)) {}

    int state_dim() const override { return 3; }
    int n_actions() const override { return 2; }

    Eigen::VectorXd reset(std::uint64_t seed) override {
        rng_.seed(seed);
        return reset();
    }

    Eigen::VectorXd reset() override {
        terminal_ = false;
        return one_hot(0);
    }

    EnvStep step(int action) override {
        if (terminal_) throw std::logic_error("ThreeStateMdp: step after terminal");
        if (action < 0 || action > 1) throw std::invalid_argument("ThreeStateMdp: bad action");
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        int dest;  // 1 => s_1, 2 => s_2
        double mean, sd;
        if (action == 0) {
            dest = (unif(rng_) < spec_.mixture_weights[0]) ? 1 : 2;
            mean = spec_.means[dest - 1];
            sd = spec_.std_devs[dest - 1];
        } else {
            dest = 2;
            mean = spec_.means[1];
            sd = spec_.std_devs[1];
        }
        std::normal_distribution<double> reward_dist(mean, sd);
        terminal_ = true;
        EnvStep out;
        out.next_state = one_hot(dest);
        out.reward = reward_dist(rng_);
        out.terminal = true;
        out.info.episode_steps = 1;
        return out;
    }

    const ThreeStateMdpSpec& spec() const { return spec_; }

private:
    Eigen::VectorXd one_hot(int s) const {
        Eigen::VectorXd v = Eigen::VectorXd::Zero(3);
        v[s] = 1.0;
        return v;
    }

    ThreeStateMdpSpec spec_;
    std::mt19937_64 rng_;
    bool terminal_ = true;
};

// --------------------------------------------------------------------------
// CartPole, classic constants, Euler integration, 200-step cap.
// --------------------------------------------------------------------------

class CartPole final : public Environment {
public:
    static constexpr double kGravity = 9.8;
    static constexpr double kMassCart = 1.0;
    static constexpr double kMassPole = 0.1;
    static constexpr double kTotalMass = kMassCart + kMassPole;
    static constexpr double kHalfLength = 0.5;
    static constexpr double kPoleMassLength = kMassPole * kHalfLength;
    static constexpr double kForceMag = 10.0;
    static constexpr double kTau = 0.02;
    static constexpr double kThetaThreshold = 12.0 * 2.0 * std::numbers::pi / 360.0;
    static constexpr double kXThreshold = 2.4;
    static constexpr int kMaxSteps = 200;

    int state_dim() const override { return 4; }
    int n_actions() const override { return 2; }  // 0 = push left, 1 = push right

    Eigen::VectorXd reset(std::uint64_t seed) override {
        rng_.seed(seed);
        return reset();
    }

    Eigen::VectorXd reset() override {
        std::uniform_real_distribution<double> init(-0.05, 0.05);
        for (int i = 0; i < 4; ++i) state_[i] = init(rng_);
        steps_ = 0;
        terminal_ = false;
        return state_;
    }

    EnvStep step(int action) override {
        if (terminal_) throw std::logic_error("CartPole: step after terminal");
        if (action < 0 || action > 1) throw std::invalid_argument("CartPole: bad action");

        double x = state_[0], x_dot = state_[1], theta = state_[2], theta_dot = state_[3];
        const double force = (action == 1) ? kForceMag : -kForceMag;
        const double cos_t = std::cos(theta), sin_t = std::sin(theta);
        const double temp =
            (force + kPoleMassLength * theta_dot * theta_dot * sin_t) / kTotalMass;
        const double theta_acc =
            (kGravity * sin_t - cos_t * temp) /
            (kHalfLength * (4.0 / 3.0 - kMassPole * cos_t * cos_t / kTotalMass));
        const double x_acc = temp - kPoleMassLength * theta_acc * cos_t / kTotalMass;

        x += kTau * x_dot;
        x_dot += kTau * x_acc;
        theta += kTau * theta_dot;
        theta_dot += kTau * theta_acc;
        state_ << x, x_dot, theta, theta_dot;
        steps_ += 1;

        const bool fell = std::abs(x) > kXThreshold || std::abs(theta) > kThetaThreshold;
        terminal_ = fell || steps_ >= kMaxSteps;

        EnvStep out;
        out.next_state = state_;
        out.reward = 1.0;
        out.terminal = terminal_;
        out.info.fall = fell;
        out.info.episode_steps = steps_;
        return out;
    }

    int episode_steps() const { return steps_; }

private:
    std::mt19937_64 rng_;
    Eigen::VectorXd state_ = Eigen::VectorXd::Zero(4);
    int steps_ = 0;
    bool terminal_ = true;
};

// --------------------------------------------------------------------------
// Highway-lite: 1-D longitudinal positions on 5 lanes, ego + constant-speed
// traffic, instantaneous lane changes, crash when a same-lane gap drops
// below 5 m. Fast driving in the rightmost lane pays best and is riskiest.
// --------------------------------------------------------------------------

struct HighwayVehicle {
    int lane = 0;
    double pos = 0.0;
    double speed = 0.0;
    bool crashed = false;
};

struct HighwayConfig {
    int n_lanes = 5;
    int n_traffic = 10;
    int max_steps = 40;
    double dt = 1.0;
    double crash_gap = 5.0;
    double lane_change_prob = 0.02;  // per traffic vehicle per step
    double clearance = 15.0;         // minimum spawn / lane-change slot
    double w_lane = 0.1;
    double w_speed = 0.4;
    double w_crash = 1.0;
    double ego_speed_min = 20.0;
    double ego_speed_max = 30.0;
    int ego_speed_levels = 4;
    double traffic_speed_min = 20.0;
    double traffic_speed_max = 26.0;
    double sense_range = 100.0;
    double spawn_front = 150.0;  // traffic placed in [-spawn_back, spawn_front]
    double spawn_back = 50.0;
    int ego_start_lane = 2;
    int ego_start_speed_level = 1;
    // fixed layout for tests: (lane, relative position, speed) per vehicle;
    // overrides random placement when non-empty
    std::vector<HighwayVehicle> fixed_traffic;
};

class HighwayLite final : public Environment {
public:
    enum Action { kLaneLeft = 0, kLaneRight = 1, kAccelerate = 2, kDecelerate = 3, kIdle = 4 };

    explicit HighwayLite(HighwayConfig config = {}) : cfg_(std::move(config)) {
        if (cfg_.n_lanes < 1 || cfg_.ego_speed_levels < 2)
            throw std::invalid_argument("HighwayLite: bad config");
    }

    int state_dim() const override { return 8; }
    int n_actions() const override { return 5; }

    Eigen::VectorXd reset(std::uint64_t seed) override {
        rng_.seed(seed);
        return reset();
    }

    Eigen::VectorXd reset() override {
        steps_ = 0;
        terminal_ = false;
        ego_.lane = std::clamp(cfg_.ego_start_lane, 0, cfg_.n_lanes - 1);
        ego_.pos = 0.0;
        ego_.crashed = false;
        speed_level_ = std::clamp(cfg_.ego_start_speed_level, 0, cfg_.ego_speed_levels - 1);
        ego_.speed = level_speed(speed_level_);
        spawn_traffic();
        return observe();
    }

    EnvStep step(int action) override {
        if (terminal_) throw std::logic_error("HighwayLite: step after terminal");
        if (action < 0 || action >= n_actions())
            throw std::invalid_argument("HighwayLite: bad action");

        switch (action) {
            case kLaneLeft: ego_.lane = std::max(ego_.lane - 1, 0); break;
            case kLaneRight: ego_.lane = std::min(ego_.lane + 1, cfg_.n_lanes - 1); break;
            case kAccelerate:
                speed_level_ = std::min(speed_level_ + 1, cfg_.ego_speed_levels - 1);
                break;
            case kDecelerate: speed_level_ = std::max(speed_level_ - 1, 0); break;
            default: break;
        }
        ego_.speed = level_speed(speed_level_);

        // occasional traffic lane changes, only into slots with enough
        // clearance against both prospective neighbours
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        for (auto& v : traffic_) {
            if (unif(rng_) >= cfg_.lane_change_prob) continue;
            int dir = (unif(rng_) < 0.5) ? -1 : 1;
            const int target = v.lane + dir;
            if (target < 0 || target >= cfg_.n_lanes) continue;
            if (slot_clear(target, v.pos, v.speed)) v.lane = target;
        }

        ego_.pos += ego_.speed * cfg_.dt;
        for (auto& v : traffic_) v.pos += v.speed * cfg_.dt;
        steps_ += 1;

        // symmetric crash detection on same-lane gaps
        bool any_crash = false;
        auto collide = [&](HighwayVehicle& a, HighwayVehicle& b) {
            if (a.lane == b.lane && std::abs(a.pos - b.pos) < cfg_.crash_gap) {
                a.crashed = true;
                b.crashed = true;
                any_crash = true;
            }
        };
        for (std::size_t i = 0; i < traffic_.size(); ++i) {
            collide(ego_, traffic_[i]);
            for (std::size_t j = i + 1; j < traffic_.size(); ++j) collide(traffic_[i], traffic_[j]);
        }

        const double speed_frac =
            (ego_.speed - cfg_.ego_speed_min) / (cfg_.ego_speed_max - cfg_.ego_speed_min);
        double reward = cfg_.w_lane * (ego_.lane == cfg_.n_lanes - 1 ? 1.0 : 0.0) +
                        cfg_.w_speed * speed_frac;
        if (ego_.crashed) reward -= cfg_.w_crash;

        terminal_ = any_crash || steps_ >= cfg_.max_steps;

        EnvStep out;
        out.next_state = observe();
        out.reward = reward;
        out.terminal = terminal_;
        out.info.crash = ego_.crashed;
        out.info.episode_steps = steps_;
        return out;
    }

    const HighwayVehicle& ego() const { return ego_; }
    const std::vector<HighwayVehicle>& traffic() const { return traffic_; }
    const HighwayConfig& config() const { return cfg_; }

private:
    double level_speed(int level) const {
        return cfg_.ego_speed_min + (cfg_.ego_speed_max - cfg_.ego_speed_min) * level /
                                        (cfg_.ego_speed_levels - 1);
    }

    bool slot_clear(int lane, double pos, double speed) const {
        auto blocked = [&](const HighwayVehicle& o) {
            if (o.lane != lane) return false;
            const double gap = o.pos - pos;
            // closing-speed-aware margin: a faster follower needs more room
            const double margin =
                cfg_.clearance + 10.0 * std::max(0.0, (gap > 0 ? speed - o.speed : o.speed - speed));
            return std::abs(gap) < margin;
        };
        if (blocked(ego_)) return false;
        for (const auto& o : traffic_)
            if (blocked(o)) return false;
        return true;
    }

    void spawn_traffic() {
        traffic_.clear();
        if (!cfg_.fixed_traffic.empty()) {
            traffic_ = cfg_.fixed_traffic;
            return;
        }
        std::uniform_int_distribution<int> lane_dist(0, cfg_.n_lanes - 1);
        std::uniform_real_distribution<double> pos_dist(-cfg_.spawn_back, cfg_.spawn_front);
        std::uniform_real_distribution<double> speed_dist(cfg_.traffic_speed_min,
                                                          cfg_.traffic_speed_max);
        int placed = 0;
        int attempts = 0;
        while (placed < cfg_.n_traffic && attempts < 1000 * std::max(cfg_.n_traffic, 1)) {
            ++attempts;
            HighwayVehicle v;
            v.lane = lane_dist(rng_);
            v.pos = pos_dist(rng_);
            v.speed = speed_dist(rng_);
            bool ok = !(v.lane == ego_.lane && std::abs(v.pos - ego_.pos) < cfg_.clearance);
            for (const auto& o : traffic_)
                if (o.lane == v.lane && std::abs(o.pos - v.pos) < cfg_.clearance) ok = false;
            if (ok) {
                traffic_.push_back(v);
                ++placed;
            }
        }
        // same-lane speeds ordered so that leaders are never slower: traffic
        // never rear-ends traffic, keeping collisions under the ego's control
        for (int lane = 0; lane < cfg_.n_lanes; ++lane) {
            std::vector<std::size_t> idx;
            for (std::size_t i = 0; i < traffic_.size(); ++i)
                if (traffic_[i].lane == lane) idx.push_back(i);
            std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
                return traffic_[a].pos < traffic_[b].pos;
            });
            std::vector<double> speeds;
            for (std::size_t i : idx) speeds.push_back(traffic_[i].speed);
            std::sort(speeds.begin(), speeds.end());
            for (std::size_t k = 0; k < idx.size(); ++k) traffic_[idx[k]].speed = speeds[k];
        }
    }

    // nearest vehicle ahead of the ego in `lane`, if any within sense range
    std::optional<std::size_t> leader_in_lane(int lane) const {
        std::optional<std::size_t> best;
        for (std::size_t i = 0; i < traffic_.size(); ++i) {
            const auto& v = traffic_[i];
            if (v.lane != lane || v.pos < ego_.pos) continue;
            if (v.pos - ego_.pos > cfg_.sense_range) continue;
            if (!best || v.pos < traffic_[*best].pos) best = i;
        }
        return best;
    }

    // 8 features in [-1, 1]: ego (lane, speed), then (gap, relative speed)
    // for ego lane, left lane, right lane. Missing lanes read as blocked.
    Eigen::VectorXd observe() const {
        Eigen::VectorXd s(8);
        s[0] = cfg_.n_lanes > 1 ? 2.0 * ego_.lane / (cfg_.n_lanes - 1) - 1.0 : 0.0;
        s[1] = 2.0 * (ego_.speed - cfg_.ego_speed_min) /
                   (cfg_.ego_speed_max - cfg_.ego_speed_min) -
               1.0;
        const int lanes[3] = {ego_.lane, ego_.lane - 1, ego_.lane + 1};
        for (int k = 0; k < 3; ++k) {
            const int lane = lanes[k];
            double gap_feat, rel_speed_feat;
            if (lane < 0 || lane >= cfg_.n_lanes) {
                gap_feat = -1.0;  // off-road: fully blocked
                rel_speed_feat = 0.0;
            } else if (auto leader = leader_in_lane(lane)) {
                const auto& v = traffic_[*leader];
                gap_feat = 2.0 * std::min(v.pos - ego_.pos, cfg_.sense_range) / cfg_.sense_range -
                           1.0;
                rel_speed_feat = std::clamp((v.speed - ego_.speed) / 10.0, -1.0, 1.0);
            } else {
                gap_feat = 1.0;  // open road
                rel_speed_feat = 0.0;
            }
            s[2 + 2 * k] = gap_feat;
            s[3 + 2 * k] = rel_speed_feat;
        }
        return s;
    }

    HighwayConfig cfg_;
    std::mt19937_64 rng_;
    HighwayVehicle ego_;
    std::vector<HighwayVehicle> traffic_;
    int speed_level_ = 0;
    int steps_ = 0;
    bool terminal_ = true;
};

}  // namespace sentinel
