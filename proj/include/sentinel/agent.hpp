#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "sentinel/categorical.hpp"
#include "sentinel/envs.hpp"
#include "sentinel/network.hpp"
#include "sentinel/replay.hpp"
#include "sentinel/risk.hpp"
#include "sentinel/util.hpp"

namespace sentinel {

/// FTRL weights from per-member estimation losses: w_i proportional to
/// exp(-lambda * l_i). lambda = 0 is exact model averaging; large lambda
/// approaches greedy selection of the minimum-loss member. Exponents are
/// shifted by the minimum loss so large lambda cannot underflow every term.
inline std::vector<double> ftrl_weights_from_losses(std::span<const double> losses,
                                                    double lambda) {
    if (losses.empty()) throw std::invalid_argument("ftrl_weights: no losses");
    if (!(lambda >= 0.0)) throw std::invalid_argument("ftrl_weights: lambda must be >= 0");
    const double min_loss = *std::min_element(losses.begin(), losses.end());
    std::vector<double> w(losses.size());
    double total = 0.0;
    for (std::size_t i = 0; i < losses.size(); ++i) {
        w[i] = std::exp(-lambda * (losses[i] - min_loss));
        total += w[i];
    }
    for (auto& wi : w) wi /= total;
    return w;
}

/// FTRL weights for one (state, action): the loss of member i is the KL
/// divergence from the uniform member mixture (the marginal posterior stand-in)
/// to member i's distribution.
inline std::vector<double> ftrl_weights(std::span<const CategoricalReturnDistribution> members,
                                        double lambda) {
    const CategoricalReturnDistribution marginal = uniform_mixture(members);
    std::vector<double> losses(members.size());
    for (std::size_t i = 0; i < members.size(); ++i)
        losses[i] = kl_divergence(marginal, members[i]);
    return ftrl_weights_from_losses(losses, lambda);
}

struct EpsilonSchedule {
    double start = 1.0;
    double end = 0.05;
    std::int64_t decay_steps = 1;

    double at(std::int64_t step) const {
        if (decay_steps <= 0) return end;
        const double frac = std::min(static_cast<double>(step) / decay_steps, 1.0);
        return start + (end - start) * frac;
    }
};

struct AgentConfig {
    int k = 4;
    double lambda = 1.0;
    RiskMeasureSpec u_a = RiskMeasureSpec::neutral();
    RiskMeasureSpec u_e = RiskMeasureSpec::neutral();
    double gamma = 0.99;
    double mask_prob = 1.0 / 3.0;
    int batch_size = 32;
    std::int64_t value_update_period = 4;    // Gamma_2 spacing
    std::int64_t target_update_period = 250; // Gamma_1 spacing
    EpsilonSchedule epsilon;
    AtomSupport support{0.0, 1.0, 51};
    std::uint64_t seed = 0;
    std::int64_t replay_capacity = 100000;
    std::vector<int> hidden = {64, 64};
    double learning_rate = 1e-3;
    // 0 recomputes decision-time FTRL weights at every state; > 0 reuses the
    // last computed per-action weights for that many steps
    std::int64_t ftrl_cache_steps = 0;

    void validate() const {
        if (k < 1 || k > 32) throw std::invalid_argument("AgentConfig: k must be in [1, 32]");
        if (!(mask_prob > 0.0 && mask_prob <= 1.0))
            throw std::invalid_argument("AgentConfig: mask_prob must be in (0, 1]");
        if (!(gamma >= 0.0 && gamma < 1.0))
            throw std::invalid_argument("AgentConfig: gamma must be in [0, 1)");
        if (value_update_period < 1 || target_update_period < 1)
            throw std::invalid_argument("AgentConfig: update periods must be >= 1");
        if (batch_size < 1) throw std::invalid_argument("AgentConfig: batch_size must be >= 1");
        if (!(lambda >= 0.0)) throw std::invalid_argument("AgentConfig: lambda must be >= 0");
    }
};

/// One bootstrapped estimator: value network, target network, optimizer.
struct EnsembleMember {
    ValueNetwork value_net;
    ValueNetwork target_net;
    AdamState opt;
    int index;

    EnsembleMember(ValueNetwork net, double learning_rate, int idx)
        : value_net(net), target_net(net), opt(value_net, learning_rate), index(idx) {}
};

/// Composite risk of one action under explicit member weights:
/// Q^A_i = U_A(member i's predicted distribution), composed by U_E over the
/// weighted discrete distribution of the Q^A values.
inline double composite_q(std::span<const EnsembleMember> members, std::span<const double> weights,
                          const Eigen::VectorXd& state, int action, const AgentConfig& config) {
    if (members.size() != weights.size()) throw std::invalid_argument("composite_q: length mismatch");
    std::vector<double> q_a(members.size());
    for (std::size_t i = 0; i < members.size(); ++i)
        q_a[i] = apply_risk(members[i].value_net.action_distribution(state, action), config.u_a);
    return discrete_risk(q_a, weights, config.u_e);
}

struct ActionDiagnostics {
    std::vector<double> ftrl_weights;  // weights for the selected action
    std::vector<double> kl_losses;     // per-member KL to the marginal
    std::vector<double> q_composite;   // per-action composite values
};

struct StepRecord {
    int action = 0;
    bool explored = false;
    EnvStep step;
};

/// The SENTINEL-K agent: K bootstrapped categorical learners over one masked
/// replay buffer, FTRL-weighted composite-risk action selection, and the
/// two-schedule training loop (value updates on Gamma_2, target syncs on
/// Gamma_1).
class SentinelAgent {
public:
    SentinelAgent(AgentConfig config, int state_dim, int n_actions)
        : cfg_(std::move(config)),
          state_dim_(state_dim),
          n_actions_(n_actions),
          buffer_(cfg_.replay_capacity, cfg_.k),
          rng_(derive_seed(cfg_.seed, 0x5eed)) {
        cfg_.validate();
        for (int i = 0; i < cfg_.k; ++i) {
            ValueNetwork net(state_dim, n_actions, cfg_.support, cfg_.hidden,
                             derive_seed(cfg_.seed, 0xbea0, static_cast<std::uint64_t>(i)));
            members_.emplace_back(std::move(net), cfg_.learning_rate, i);
        }
    }

    const AgentConfig& config() const { return cfg_; }
    std::span<const EnsembleMember> members() const { return members_; }
    EnsembleMember& member(int i) { return members_[static_cast<std::size_t>(i)]; }
    const ReplayBuffer& buffer() const { return buffer_; }
    std::int64_t env_steps() const { return env_steps_; }
    std::int64_t skipped_updates() const { return skipped_updates_; }
    const ActionDiagnostics& last_diagnostics() const { return diag_; }
    double last_loss() const { return last_loss_; }

    /// Per-action composite values over the given networks (value networks at
    /// decision time, target networks when forming Bellman targets). FTRL
    /// weights are computed per action from the members' distributions.
    std::vector<double> composite_action_values(
        const std::vector<std::vector<CategoricalReturnDistribution>>& per_member_dists) const {
        std::vector<double> values(n_actions_);
        std::vector<CategoricalReturnDistribution> slice;
        std::vector<double> q_a(members_.size());
        for (int a = 0; a < n_actions_; ++a) {
            slice.clear();
            for (const auto& dists : per_member_dists) slice.push_back(dists[a]);
            const std::vector<double> w = ftrl_weights(slice, cfg_.lambda);
            for (std::size_t i = 0; i < members_.size(); ++i)
                q_a[i] = apply_risk(slice[i], cfg_.u_a);
            values[a] = discrete_risk(q_a, w, cfg_.u_e);
        }
        return values;
    }

    /// Greedy action from the value networks; ties break to the lowest index.
    int greedy_action(const Eigen::VectorXd& state) {
        std::vector<std::vector<CategoricalReturnDistribution>> dists;
        dists.reserve(members_.size());
        for (const auto& m : members_) dists.push_back(m.value_net.forward(state));

        std::vector<double> values;
        if (cfg_.ftrl_cache_steps > 0 && !cached_weights_.empty() &&
            env_steps_ < weights_valid_until_) {
            values.assign(n_actions_, 0.0);
            std::vector<double> q_a(members_.size());
            for (int a = 0; a < n_actions_; ++a) {
                for (std::size_t i = 0; i < members_.size(); ++i)
                    q_a[i] = apply_risk(dists[i][a], cfg_.u_a);
                values[a] = discrete_risk(q_a, cached_weights_[a], cfg_.u_e);
            }
        } else {
            values = composite_action_values(dists);
            if (cfg_.ftrl_cache_steps > 0) {
                cached_weights_.clear();
                std::vector<CategoricalReturnDistribution> slice;
                for (int a = 0; a < n_actions_; ++a) {
                    slice.clear();
                    for (const auto& d : dists) slice.push_back(d[a]);
                    cached_weights_.push_back(ftrl_weights(slice, cfg_.lambda));
                }
                weights_valid_until_ = env_steps_ + cfg_.ftrl_cache_steps;
            }
        }

        int best = 0;
        for (int a = 1; a < n_actions_; ++a)
            if (values[a] > values[best]) best = a;

        // diagnostics for the chosen action
        std::vector<CategoricalReturnDistribution> slice;
        for (const auto& d : dists) slice.push_back(d[best]);
        const CategoricalReturnDistribution marginal = uniform_mixture(slice);
        diag_.kl_losses.resize(members_.size());
        for (std::size_t i = 0; i < members_.size(); ++i)
            diag_.kl_losses[i] = kl_divergence(marginal, slice[i]);
        diag_.ftrl_weights = ftrl_weights_from_losses(diag_.kl_losses, cfg_.lambda);
        diag_.q_composite = values;
        return best;
    }

    /// Epsilon-greedy over the composite-Q argmax. One uniform draw decides
    /// exploration; a second draw picks the explored action.
    int select_action(const Eigen::VectorXd& state) {
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        const double eps = cfg_.epsilon.at(env_steps_);
        if (unif(rng_) < eps) {
            std::uniform_int_distribution<int> pick(0, n_actions_ - 1);
            explored_ = true;
            return pick(rng_);
        }
        explored_ = false;
        return greedy_action(state);
    }

    /// Select an action, step the environment, and append the transition with
    /// a fresh Bernoulli(mask_prob) inclusion mask (one uniform draw per
    /// member, in member order).
    StepRecord act_and_record(Environment& env, const Eigen::VectorXd& state) {
        StepRecord rec;
        rec.action = select_action(state);
        rec.explored = explored_;
        rec.step = env.step(rec.action);
        record_transition(state, rec.action, rec.step);
        return rec;
    }

    void record_transition(const Eigen::VectorXd& state, int action, const EnvStep& step) {
        MaskedTransition t;
        t.state = state;
        t.action = action;
        t.reward = step.reward;
        t.next_state = step.next_state;
        t.terminal = step.terminal;
        t.mask = draw_mask();
        buffer_.push(std::move(t));
        env_steps_ += 1;
    }

    bool ready_to_train() const {
        if (buffer_.size() < cfg_.batch_size) return false;
        for (int i = 0; i < cfg_.k; ++i)
            if (buffer_.view_size(i) <= 0) return false;
        return true;
    }

    /// One scheduler tick: on Gamma_2 steps each member trains on a minibatch
    /// from its masked view against projected Bellman targets; on Gamma_1
    /// steps every target network is synchronized from its value network.
    void training_step(std::int64_t global_step) {
        if (global_step % cfg_.value_update_period == 0) {
            if (!ready_to_train()) {
                ++skipped_updates_;
            } else {
                // draw all minibatch indices first so the RNG stream does not
                // depend on how long each member's update takes
                std::vector<std::vector<std::int64_t>> indices(members_.size());
                for (std::size_t i = 0; i < members_.size(); ++i) {
                    indices[i].resize(static_cast<std::size_t>(cfg_.batch_size));
                    for (auto& idx : indices[i])
                        idx = buffer_.sample_index(static_cast<int>(i), rng_);
                }
                double total_loss = 0.0;
                for (std::size_t i = 0; i < members_.size(); ++i)
                    total_loss += update_member(static_cast<int>(i), indices[i]);
                last_loss_ = total_loss / static_cast<double>(members_.size());
            }
        }
        if (global_step % cfg_.target_update_period == 0) {
            for (auto& m : members_) m.target_net = sync_target(m.value_net);
        }
    }

private:
    std::uint32_t draw_mask() {
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        std::uint32_t mask = 0;
        for (int i = 0; i < cfg_.k; ++i)
            if (unif(rng_) < cfg_.mask_prob) mask |= (1u << i);
        return mask;
    }

    /// Projected Bellman target for member i on one transition. The successor
    /// action a* maximizes the composite risk over all K target networks (the
    /// decision rule mirrored onto the targets); the target distribution
    /// itself comes from member i's own target network at (s', a*).
    CategoricalReturnDistribution target_distribution(int i, const MaskedTransition& t) const {
        if (t.terminal)
            return project_bellman(CategoricalReturnDistribution::uniform(cfg_.support), t.reward,
                                   cfg_.gamma, true);
        std::vector<std::vector<CategoricalReturnDistribution>> dists;
        dists.reserve(members_.size());
        for (const auto& m : members_) dists.push_back(m.target_net.forward(t.next_state));
        const std::vector<double> values = composite_action_values(dists);
        int best = 0;
        for (int a = 1; a < n_actions_; ++a)
            if (values[a] > values[best]) best = a;
        return project_bellman(dists[static_cast<std::size_t>(i)][static_cast<std::size_t>(best)],
                               t.reward, cfg_.gamma, false);
    }

    double update_member(int i, const std::vector<std::int64_t>& indices) {
        EnsembleMember& m = members_[static_cast<std::size_t>(i)];
        std::vector<TrainSample> batch;
        batch.reserve(indices.size());
        for (std::int64_t idx : indices) {
            const MaskedTransition& t = buffer_.at(idx);
            batch.push_back({t.state, t.action, target_distribution(i, t).masses()});
        }
        return train_step(m.value_net, m.opt, batch);
    }

    AgentConfig cfg_;
    int state_dim_;
    int n_actions_;
    std::vector<EnsembleMember> members_;
    ReplayBuffer buffer_;
    std::mt19937_64 rng_;
    std::int64_t env_steps_ = 0;
    std::int64_t skipped_updates_ = 0;
    double last_loss_ = 0.0;
    bool explored_ = false;
    ActionDiagnostics diag_;
    std::vector<std::vector<double>> cached_weights_;
    std::int64_t weights_valid_until_ = 0;
};

}  // namespace sentinel
