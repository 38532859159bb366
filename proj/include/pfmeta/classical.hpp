#pragma once

// Classical pooling: inverse-variance fixed-effect model, DerSimonian-Laird
// random-effects model, and the Q / I^2 heterogeneity diagnostics.

#include <algorithm>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pfmeta/effect_size.hpp"

namespace pfmeta {

enum class PoolModel { fixed, random };

struct PooledResult {
    double spf = 0.0;
    double variance = 0.0;
    Interval ci;
    std::vector<double> weights;  // normalized, sum to 1
    PoolModel model = PoolModel::fixed;
};

struct HeterogeneityStats {
    double q = 0.0;
    std::size_t df = 0;
    double i_squared = 0.0;
    double tau2_dl = 0.0;
};

namespace detail {
inline void require_estimates(std::span<const EffectEstimate> est, std::size_t min_k,
                              const char* op) {
    if (est.size() < min_k) {
        throw std::domain_error(std::string(op) + ": needs at least " +
                                std::to_string(min_k) + " studies");
    }
    for (const auto& e : est) {
        if (!(e.variance > 0.0)) {
            throw std::domain_error(std::string(op) + ": nonpositive variance for study " +
                                    e.label);
        }
    }
}
}  // namespace detail

inline PooledResult fixed_effect_pool(std::span<const EffectEstimate> estimates) {
    detail::require_estimates(estimates, 1, "fixed_effect_pool");
    double sum_w = 0.0;
    double sum_wy = 0.0;
    for (const auto& e : estimates) {
        const double w = 1.0 / e.variance;
        sum_w += w;
        sum_wy += w * e.pf;
    }
    PooledResult r;
    r.model = PoolModel::fixed;
    r.spf = sum_wy / sum_w;
    r.variance = 1.0 / sum_w;
    r.ci = variance_to_ci(r.spf, r.variance);
    r.weights.reserve(estimates.size());
    for (const auto& e : estimates) r.weights.push_back((1.0 / e.variance) / sum_w);
    return r;
}

// Q = sum_i (1/V_i) (PF_i - SPF_fixed)^2
inline double cochran_q(std::span<const EffectEstimate> estimates) {
    detail::require_estimates(estimates, 2, "cochran_q");
    const PooledResult fixed = fixed_effect_pool(estimates);
    double q = 0.0;
    for (const auto& e : estimates) {
        const double d = e.pf - fixed.spf;
        q += d * d / e.variance;
    }
    return q;
}

// I^2 = max(0, (Q - df) / Q), zero when Q = 0.
inline double i_squared(double q, std::size_t k) {
    if (k < 2) throw std::domain_error("i_squared: needs at least 2 studies");
    if (q < 0.0) throw std::domain_error("i_squared: negative Q");
    if (q == 0.0) return 0.0;
    const double df = static_cast<double>(k - 1);
    return std::max(0.0, (q - df) / q);
}

// DerSimonian-Laird moment estimator. The denominator uses raw precisions
// 1/V_i, not normalized weights.
inline double dl_tau2(std::span<const EffectEstimate> estimates) {
    detail::require_estimates(estimates, 2, "dl_tau2");
    const double q = cochran_q(estimates);
    double sum_w = 0.0;
    double sum_w2 = 0.0;
    for (const auto& e : estimates) {
        const double w = 1.0 / e.variance;
        sum_w += w;
        sum_w2 += w * w;
    }
    const double df = static_cast<double>(estimates.size() - 1);
    const double denom = sum_w - sum_w2 / sum_w;
    return std::max(0.0, (q - df) / denom);
}

inline PooledResult random_effects_pool(std::span<const EffectEstimate> estimates,
                                        double tau2) {
    detail::require_estimates(estimates, 1, "random_effects_pool");
    if (tau2 < 0.0) throw std::domain_error("random_effects_pool: negative tau2");
    double sum_w = 0.0;
    double sum_wy = 0.0;
    for (const auto& e : estimates) {
        const double w = 1.0 / (e.variance + tau2);
        sum_w += w;
        sum_wy += w * e.pf;
    }
    PooledResult r;
    r.model = PoolModel::random;
    r.spf = sum_wy / sum_w;
    r.variance = 1.0 / sum_w;
    r.ci = variance_to_ci(r.spf, r.variance);
    r.weights.reserve(estimates.size());
    for (const auto& e : estimates)
        r.weights.push_back((1.0 / (e.variance + tau2)) / sum_w);
    return r;
}

inline HeterogeneityStats heterogeneity(std::span<const EffectEstimate> estimates) {
    HeterogeneityStats h;
    h.q = cochran_q(estimates);
    h.df = estimates.size() - 1;
    h.i_squared = i_squared(h.q, estimates.size());
    h.tau2_dl = dl_tau2(estimates);
    return h;
}

}  // namespace pfmeta
