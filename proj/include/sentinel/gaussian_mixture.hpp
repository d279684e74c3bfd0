#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "sentinel/categorical.hpp"
#include "sentinel/normal.hpp"
#include "sentinel/risk.hpp"

namespace sentinel {

/// Finite mixture of Gaussians. Components double as the plausible models
/// theta with the mixture weights as the belief over them.
struct GaussianMixtureModel {
    std::vector<double> weights;
    std::vector<double> means;
    std::vector<double> variances;

    void validate() const {
        if (weights.size() != means.size() || weights.size() != variances.size() ||
            weights.empty())
            throw std::invalid_argument("GaussianMixtureModel: inconsistent component arrays");
        double total = 0.0;
        for (double w : weights) {
            if (!(w >= 0.0)) throw std::invalid_argument("GaussianMixtureModel: negative weight");
            total += w;
        }
        if (std::abs(total - 1.0) > 1e-12)
            throw std::invalid_argument("GaussianMixtureModel: weights do not sum to 1");
        for (double v : variances)
            if (!(v > 0.0))
                throw std::invalid_argument("GaussianMixtureModel: non-positive variance");
    }

    std::size_t size() const { return weights.size(); }

    double mean() const {
        double m = 0.0;
        for (std::size_t i = 0; i < size(); ++i) m += weights[i] * means[i];
        return m;
    }

    double cdf(double x) const {
        double c = 0.0;
        for (std::size_t i = 0; i < size(); ++i)
            c += weights[i] * normal_cdf((x - means[i]) / std::sqrt(variances[i]));
        return c;
    }
};

/// Draw a mixture from the prior: weights ~ Dirichlet(0.5,...,0.5), means
/// i.i.d. N(0,1), variances i.i.d. inverse-gamma(shape 2, scale 1).
inline GaussianMixtureModel sample_mixture_prior(int m, std::uint64_t rng_seed) {
    if (m < 1) throw std::invalid_argument("sample_mixture_prior: need at least one component");
    std::mt19937_64 rng(rng_seed);

    GaussianMixtureModel model;
    model.weights.resize(m);
    model.means.resize(m);
    model.variances.resize(m);

    // Dirichlet via normalized Gamma(0.5, 1) draws.
    std::gamma_distribution<double> gamma_half(0.5, 1.0);
    double total = 0.0;
    for (int i = 0; i < m; ++i) {
        model.weights[i] = gamma_half(rng);
        total += model.weights[i];
    }
    for (int i = 0; i < m; ++i) model.weights[i] /= total;
    // renormalize the residue onto the largest weight so the simplex check
    // holds at 1e-12
    double drift = 1.0;
    for (int i = 0; i < m; ++i) drift -= model.weights[i];
    model.weights[0] += drift;

    std::normal_distribution<double> std_normal(0.0, 1.0);
    std::gamma_distribution<double> gamma_shape2(2.0, 1.0);
    for (int i = 0; i < m; ++i) model.means[i] = std_normal(rng);
    for (int i = 0; i < m; ++i) model.variances[i] = 1.0 / gamma_shape2(rng);

    model.validate();
    return model;
}

inline double sample_from_mixture(const GaussianMixtureModel& model, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    double u = unif(rng);
    std::size_t comp = model.size() - 1;
    double acc = 0.0;
    for (std::size_t i = 0; i < model.size(); ++i) {
        acc += model.weights[i];
        if (u <= acc) {
            comp = i;
            break;
        }
    }
    std::normal_distribution<double> comp_dist(model.means[comp], std::sqrt(model.variances[comp]));
    return comp_dist(rng);
}

/// Exact bin-mass discretization: atom i receives the mixture CDF mass of
/// [z_i - dz/2, z_i + dz/2], with the boundary bins extended to +-infinity.
inline CategoricalReturnDistribution discretize_gaussian_mixture(const GaussianMixtureModel& model,
                                                                 const AtomSupport& support) {
    model.validate();
    const int n = support.n_atoms();
    const double half = 0.5 * support.delta();
    std::vector<double> masses(n);
    double prev = 0.0;  // CDF at the lower bin edge
    for (int i = 0; i < n; ++i) {
        const double upper_edge = (i == n - 1) ? 1.0 : model.cdf(support.atom(i) + half);
        masses[i] = std::max(upper_edge - prev, 0.0);
        prev = upper_edge;
    }
    return {support, std::move(masses)};
}

/// Monte-Carlo CVaR of the marginal mixture ("total CVaR from data").
inline double mixture_cvar_oracle(const GaussianMixtureModel& model, double alpha,
                                  std::int64_t n_samples, std::uint64_t rng_seed) {
    model.validate();
    detail::require_level(alpha);
    if (n_samples < 1) throw std::invalid_argument("mixture_cvar_oracle: need samples");
    std::mt19937_64 rng(rng_seed);
    std::vector<double> samples(static_cast<std::size_t>(n_samples));
    for (auto& s : samples) s = sample_from_mixture(model, rng);
    return cvar_empirical(samples, alpha).cvar;
}

}  // namespace sentinel
