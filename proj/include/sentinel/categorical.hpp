#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace sentinel {

inline constexpr double kMassTolerance = 1e-9;
inline constexpr double kKlFloor = 1e-8;

/// Evenly spaced atom grid on [v_min, v_max].
class AtomSupport {
public:
    AtomSupport(double v_min, double v_max, int n_atoms)
        : v_min_(v_min), v_max_(v_max), n_atoms_(n_atoms) {
        if (!(v_min < v_max)) throw std::invalid_argument("AtomSupport: v_min must be < v_max");
        if (n_atoms < 2) throw std::invalid_argument("AtomSupport: need at least 2 atoms");
    }

    double v_min() const { return v_min_; }
    double v_max() const { return v_max_; }
    int n_atoms() const { return n_atoms_; }
    double delta() const { return (v_max_ - v_min_) / (n_atoms_ - 1); }
    double atom(int i) const { return v_min_ + i * delta(); }

    friend bool operator==(const AtomSupport& a, const AtomSupport& b) {
        return a.v_min_ == b.v_min_ && a.v_max_ == b.v_max_ && a.n_atoms_ == b.n_atoms_;
    }
    friend bool operator!=(const AtomSupport& a, const AtomSupport& b) { return !(a == b); }

private:
    double v_min_;
    double v_max_;
    int n_atoms_;
};

/// Probability masses over a fixed AtomSupport. Immutable value type; all
/// constructors validate non-negativity and unit total mass.
class CategoricalReturnDistribution {
public:
    CategoricalReturnDistribution(AtomSupport support, std::vector<double> masses)
        : support_(support), masses_(std::move(masses)) {
        if (static_cast<int>(masses_.size()) != support_.n_atoms())
            throw std::invalid_argument("distribution: mass vector length != atom count");
        double total = 0.0;
        for (double m : masses_) {
            if (!(m >= 0.0)) throw std::invalid_argument("distribution: negative or NaN mass");
            total += m;
        }
        if (std::abs(total - 1.0) > kMassTolerance)
            throw std::invalid_argument("distribution: masses do not sum to 1");
    }

    static CategoricalReturnDistribution uniform(AtomSupport support) {
        std::vector<double> m(support.n_atoms(), 1.0 / support.n_atoms());
        return {support, std::move(m)};
    }

    /// Unit mass at `value`, split between the two neighbouring atoms
    /// (clipped to the support range).
    static CategoricalReturnDistribution point_mass(AtomSupport support, double value);

    const AtomSupport& support() const { return support_; }
    const std::vector<double>& masses() const { return masses_; }
    double mass(int i) const { return masses_[i]; }

    double mean() const {
        double m = 0.0;
        for (int i = 0; i < support_.n_atoms(); ++i) m += masses_[i] * support_.atom(i);
        return m;
    }

private:
    AtomSupport support_;
    std::vector<double> masses_;
};

namespace detail {

inline void require_same_support(const CategoricalReturnDistribution& p,
                                 const CategoricalReturnDistribution& q) {
    if (p.support() != q.support())
        throw std::invalid_argument("distributions are on different supports");
}

// Distribute `mass` at target value `tz` onto the two nearest atoms.
inline void splat(std::vector<double>& out, const AtomSupport& s, double tz, double mass) {
    const double clipped = std::clamp(tz, s.v_min(), s.v_max());
    // clamp the fractional index too: (v_max - v_min) / delta can land an
    // epsilon above n_atoms - 1
    const double b =
        std::clamp((clipped - s.v_min()) / s.delta(), 0.0, static_cast<double>(s.n_atoms() - 1));
    const auto lower = static_cast<int>(std::floor(b));
    const auto upper = static_cast<int>(std::ceil(b));
    if (lower == upper) {
        out[lower] += mass;
    } else {
        out[lower] += mass * (upper - b);
        out[upper] += mass * (b - lower);
    }
}

}  // namespace detail

inline CategoricalReturnDistribution CategoricalReturnDistribution::point_mass(AtomSupport support,
                                                                               double value) {
    std::vector<double> m(support.n_atoms(), 0.0);
    detail::splat(m, support, value, 1.0);
    return {support, std::move(m)};
}

/// Distributional Bellman backup projected onto the source support: each atom
/// z_j maps to r + discount * z_j (clipped), and its mass is split linearly
/// between the two neighbouring atoms. Terminal transitions collapse onto the
/// immediate reward.
inline CategoricalReturnDistribution project_bellman(const CategoricalReturnDistribution& dist,
                                                     double reward, double discount,
                                                     bool terminal) {
    if (!(discount >= 0.0 && discount <= 1.0))
        throw std::invalid_argument("project_bellman: discount must be in [0,1]");
    const AtomSupport& s = dist.support();
    std::vector<double> out(s.n_atoms(), 0.0);
    if (terminal) {
        detail::splat(out, s, reward, 1.0);
    } else {
        for (int j = 0; j < s.n_atoms(); ++j) {
            const double pj = dist.mass(j);
            if (pj == 0.0) continue;
            detail::splat(out, s, reward + discount * s.atom(j), pj);
        }
    }
    return {s, std::move(out)};
}

/// Weighted average of distributions sharing one support.
inline CategoricalReturnDistribution mixture(std::span<const CategoricalReturnDistribution> dists,
                                             std::span<const double> weights) {
    if (dists.empty()) throw std::invalid_argument("mixture: no distributions");
    if (dists.size() != weights.size()) throw std::invalid_argument("mixture: length mismatch");
    const AtomSupport& s = dists.front().support();
    double wsum = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0)) throw std::invalid_argument("mixture: negative weight");
        wsum += w;
    }
    if (std::abs(wsum - 1.0) > kMassTolerance)
        throw std::invalid_argument("mixture: weights do not sum to 1");

    std::vector<double> out(s.n_atoms(), 0.0);
    for (std::size_t k = 0; k < dists.size(); ++k) {
        detail::require_same_support(dists.front(), dists[k]);
        for (int i = 0; i < s.n_atoms(); ++i) out[i] += weights[k] * dists[k].mass(i);
    }
    return {s, std::move(out)};
}

inline CategoricalReturnDistribution uniform_mixture(
    std::span<const CategoricalReturnDistribution> dists) {
    std::vector<double> w(dists.size(), 1.0 / dists.size());
    return mixture(dists, w);
}

/// KL(p || q) with both mass vectors floored at kKlFloor and renormalized, so
/// the result stays finite for distributions with empty atoms.
inline double kl_divergence(const CategoricalReturnDistribution& p,
                            const CategoricalReturnDistribution& q) {
    detail::require_same_support(p, q);
    const int n = p.support().n_atoms();
    double psum = 0.0, qsum = 0.0;
    for (int i = 0; i < n; ++i) {
        psum += std::max(p.mass(i), kKlFloor);
        qsum += std::max(q.mass(i), kKlFloor);
    }
    double kl = 0.0;
    for (int i = 0; i < n; ++i) {
        const double pi = std::max(p.mass(i), kKlFloor) / psum;
        const double qi = std::max(q.mass(i), kKlFloor) / qsum;
        kl += pi * std::log(pi / qi);
    }
    return std::max(kl, 0.0);
}

/// W1 distance between same-support categoricals: delta_z * sum_i |CDF_p - CDF_q|.
inline double wasserstein1(const CategoricalReturnDistribution& p,
                           const CategoricalReturnDistribution& q) {
    detail::require_same_support(p, q);
    const int n = p.support().n_atoms();
    double cp = 0.0, cq = 0.0, acc = 0.0;
    for (int i = 0; i < n; ++i) {
        cp += p.mass(i);
        cq += q.mass(i);
        acc += std::abs(cp - cq);
    }
    return p.support().delta() * acc;
}

inline void to_json(nlohmann::json& j, const CategoricalReturnDistribution& d) {
    j = nlohmann::json{{"v_min", d.support().v_min()},
                       {"v_max", d.support().v_max()},
                       {"masses", d.masses()}};
}

inline CategoricalReturnDistribution distribution_from_json(const nlohmann::json& j) {
    const auto masses = j.at("masses").get<std::vector<double>>();
    AtomSupport support(j.at("v_min").get<double>(), j.at("v_max").get<double>(),
                        static_cast<int>(masses.size()));
    return {support, masses};
}

}  // namespace sentinel
