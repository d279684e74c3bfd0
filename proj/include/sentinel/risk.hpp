#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "sentinel/categorical.hpp"
#include "sentinel/normal.hpp"

namespace sentinel {

// All CVaR quantities below are left-tail statistics of returns: the
// expectation of the worst alpha-fraction of outcomes. alpha = 1 recovers the
// plain mean; alpha -> 0 approaches the essential infimum; alpha = 0 is
// rejected as invalid input.

enum class RiskKind { Neutral, CVaR };

struct RiskMeasureSpec {
    RiskKind kind = RiskKind::Neutral;
    double alpha = 1.0;  // tail fraction, CVaR only

    static RiskMeasureSpec neutral() { return {RiskKind::Neutral, 1.0}; }

    static RiskMeasureSpec cvar(double alpha) {
        if (!(alpha > 0.0 && alpha <= 1.0))
            throw std::invalid_argument("RiskMeasureSpec: invalid level");
        return {RiskKind::CVaR, alpha};
    }

    bool is_neutral() const { return kind == RiskKind::Neutral; }
};

struct TailStatistics {
    double var;   // alpha-quantile threshold, return units
    double cvar;  // tail expectation, return units
};

namespace detail {

inline void require_level(double alpha) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("invalid level");
}

inline void require_simplex(std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0)) throw std::invalid_argument("weights must be non-negative");
        total += w;
    }
    if (std::abs(total - 1.0) > kMassTolerance)
        throw std::invalid_argument("weights do not sum to 1");
}

// ceil(alpha * n) with a guard against the product landing an ulp high.
inline std::size_t tail_count(double alpha, std::size_t n) {
    auto k = static_cast<std::size_t>(std::ceil(alpha * static_cast<double>(n) - 1e-9));
    return std::clamp<std::size_t>(k, 1, n);
}

}  // namespace detail

/// Empirical left-tail CVaR: the mean of the ceil(alpha*n) smallest samples.
/// The VaR is the lower-interpolation order statistic at that index.
inline TailStatistics cvar_empirical(std::span<const double> samples, double alpha) {
    if (samples.empty()) throw std::invalid_argument("no samples");
    detail::require_level(alpha);
    std::vector<double> sorted(samples.begin(), samples.end());
    std::sort(sorted.begin(), sorted.end());
    const std::size_t k = detail::tail_count(alpha, sorted.size());
    const double tail_sum = std::accumulate(sorted.begin(), sorted.begin() + k, 0.0);
    return {sorted[k - 1], tail_sum / static_cast<double>(k)};
}

/// Closed-form left-tail CVaR of N(mu, sigma^2).
inline double cvar_gaussian(double mu, double sigma, double alpha) {
    if (!(sigma > 0.0)) throw std::invalid_argument("cvar_gaussian: sigma must be positive");
    detail::require_level(alpha);
    if (alpha == 1.0) return mu;
    return mu - sigma * normal_pdf(normal_quantile(alpha)) / alpha;
}

/// Left-tail CVaR of a weighted finite distribution {(values[i], weights[i])}.
/// Mass is accumulated from the smallest value upward until the tail holds
/// alpha, splitting the boundary point's weight fractionally.
inline TailStatistics cvar_discrete(std::span<const double> values,
                                    std::span<const double> weights, double alpha) {
    if (values.empty()) throw std::invalid_argument("no samples");
    if (values.size() != weights.size()) throw std::invalid_argument("length mismatch");
    detail::require_level(alpha);
    detail::require_simplex(weights);

    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });

    double remaining = alpha;
    double tail_sum = 0.0;
    double threshold = values[order.back()];
    for (std::size_t idx : order) {
        const double take = std::min(weights[idx], remaining);
        tail_sum += take * values[idx];
        remaining -= take;
        if (remaining <= 0.0) {
            threshold = values[idx];
            break;
        }
    }
    // remaining can stay marginally positive when the weights sum to slightly
    // under alpha = 1; normalize by the mass actually collected.
    const double collected = alpha - std::max(remaining, 0.0);
    return {threshold, tail_sum / collected};
}

/// Left-tail CVaR of a categorical return distribution.
inline TailStatistics cvar_categorical(const CategoricalReturnDistribution& dist, double alpha) {
    const AtomSupport& s = dist.support();
    std::vector<double> atoms(s.n_atoms());
    for (int i = 0; i < s.n_atoms(); ++i) atoms[i] = s.atom(i);
    return cvar_discrete(atoms, dist.masses(), alpha);
}

/// U(dist): mean for Neutral, tail expectation for CVaR.
inline double apply_risk(const CategoricalReturnDistribution& dist, const RiskMeasureSpec& u) {
    if (u.is_neutral()) return dist.mean();
    return cvar_categorical(dist, u.alpha).cvar;
}

/// U over a weighted finite distribution of scalar outcomes.
inline double discrete_risk(std::span<const double> values, std::span<const double> weights,
                            const RiskMeasureSpec& u) {
    if (values.size() != weights.size()) throw std::invalid_argument("length mismatch");
    if (u.is_neutral()) {
        detail::require_simplex(weights);
        double m = 0.0;
        for (std::size_t i = 0; i < values.size(); ++i) m += weights[i] * values[i];
        return m;
    }
    return cvar_discrete(values, weights, u.alpha).cvar;
}

namespace detail {

inline void require_belief(std::span<const CategoricalReturnDistribution> models,
                           std::span<const double> belief) {
    if (models.empty()) throw std::invalid_argument("no models");
    if (models.size() != belief.size()) throw std::invalid_argument("length mismatch");
    require_simplex(belief);
}

}  // namespace detail

/// Centered aleatory term A(U_A, beta): belief-weighted per-model risk minus
/// the risk of the belief mixture.
inline double aleatory_risk(std::span<const CategoricalReturnDistribution> models,
                            std::span<const double> belief, const RiskMeasureSpec& u_a) {
    detail::require_belief(models, belief);
    double per_model = 0.0;
    for (std::size_t i = 0; i < models.size(); ++i)
        per_model += belief[i] * apply_risk(models[i], u_a);
    return per_model - apply_risk(mixture(models, belief), u_a);
}

/// Epistemic term E(U_E, beta): U_E of the discrete distribution that puts
/// mass beta_i on the mean of model i.
inline double epistemic_risk(std::span<const CategoricalReturnDistribution> models,
                             std::span<const double> belief, const RiskMeasureSpec& u_e) {
    detail::require_belief(models, belief);
    std::vector<double> means(models.size());
    for (std::size_t i = 0; i < models.size(); ++i) means[i] = models[i].mean();
    return discrete_risk(means, belief, u_e);
}

/// Composite risk F^C(U_A, U_E, beta): U_E over the belief-weighted discrete
/// distribution of per-model aleatory risks U_A(P(.|theta_i)).
inline double composite_risk(std::span<const CategoricalReturnDistribution> models,
                             std::span<const double> belief, const RiskMeasureSpec& u_a,
                             const RiskMeasureSpec& u_e) {
    detail::require_belief(models, belief);
    std::vector<double> inner(models.size());
    for (std::size_t i = 0; i < models.size(); ++i) inner[i] = apply_risk(models[i], u_a);
    return discrete_risk(inner, belief, u_e);
}

/// Additive risk F^A(U_A, beta): belief-weighted average of per-model risks,
/// i.e. composite risk with U_E fixed to the identity.
inline double additive_risk(std::span<const CategoricalReturnDistribution> models,
                            std::span<const double> belief, const RiskMeasureSpec& u_a) {
    detail::require_belief(models, belief);
    double total = 0.0;
    for (std::size_t i = 0; i < models.size(); ++i)
        total += belief[i] * apply_risk(models[i], u_a);
    return total;
}

}  // namespace sentinel
