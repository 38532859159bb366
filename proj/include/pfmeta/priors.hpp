#pragma once

// Heterogeneity-prior families for the between-study variance, plus the
// prior on the pooled effect. Each family has a natural sampling
// parameterization:
//
//   ParetoTau, HalfNormalTau      -> tau   (between-study SD)
//   RatioB                        -> B = tau2/(tau2 + s0_sq) in (0,1)
//   ScaledChiSqPrecision, GammaPrecision -> precision 1/tau2
//
// log_prior() evaluates the density in the family's own parameterization at
// the point corresponding to tau2. log_prior_tau_space() re-expresses the
// same density as a density of tau, Jacobian included; the quadrature
// oracle integrates in that space.

#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>

namespace pfmeta {

struct ParetoTau {
    double s0 = 1.0;
};

struct HalfNormalTau {
    double scale = 1.0;
};

struct RatioB {
    double shape1 = 1.0;  // Beta(1,1) is the uniform variant
    double shape2 = 1.0;
    double s0_sq = 1.0;
};

struct ScaledChiSqPrecision {
    double d = 4.0;  // 1/tau2 ~ chi^2_d / d
};

struct GammaPrecision {
    double a = 0.001;
    double b = 0.001;
};

using PriorSpec = std::variant<ParetoTau, HalfNormalTau, RatioB,
                               ScaledChiSqPrecision, GammaPrecision>;

struct FlatMu {};
struct NormalMu {
    double mean = 0.0;
    double precision = 0.001;
};
using MuPrior = std::variant<FlatMu, NormalMu>;

inline void validate_prior(const PriorSpec& prior) {
    std::visit(
        [](const auto& p) {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, ParetoTau>) {
                if (!(p.s0 > 0.0)) throw std::domain_error("ParetoTau: s0 must be > 0");
            } else if constexpr (std::is_same_v<T, HalfNormalTau>) {
                if (!(p.scale > 0.0))
                    throw std::domain_error("HalfNormalTau: scale must be > 0");
            } else if constexpr (std::is_same_v<T, RatioB>) {
                if (!(p.shape1 > 0.0) || !(p.shape2 > 0.0) || !(p.s0_sq > 0.0))
                    throw std::domain_error("RatioB: shapes and s0_sq must be > 0");
            } else if constexpr (std::is_same_v<T, ScaledChiSqPrecision>) {
                if (!(p.d >= 1.0))
                    throw std::domain_error("ScaledChiSqPrecision: d must be >= 1");
            } else {
                if (!(p.a > 0.0) || !(p.b > 0.0))
                    throw std::domain_error("GammaPrecision: a and b must be > 0");
            }
        },
        prior);
}

// s0_sq = k / sum(1/V_i), the harmonic mean of within-study variances.
inline double harmonic_mean_s0sq(std::span<const double> variances) {
    if (variances.empty())
        throw std::domain_error("harmonic_mean_s0sq: empty variance list");
    double sum_prec = 0.0;
    for (double v : variances) {
        if (!(v > 0.0))
            throw std::domain_error("harmonic_mean_s0sq: nonpositive variance");
        sum_prec += 1.0 / v;
    }
    return static_cast<double>(variances.size()) / sum_prec;
}

// tau2 = B s0_sq / (1 - B); inverse of B(tau2) = tau2/(tau2 + s0_sq).
inline double b_to_tau2(double b, double s0_sq) {
    if (!(b > 0.0 && b < 1.0))
        throw std::domain_error("b_to_tau2: b must lie in (0,1)");
    if (!(s0_sq > 0.0)) throw std::domain_error("b_to_tau2: s0_sq must be > 0");
    return b * s0_sq / (1.0 - b);
}

inline double tau2_to_b(double tau2, double s0_sq) {
    if (!(tau2 > 0.0)) throw std::domain_error("tau2_to_b: tau2 must be > 0");
    if (!(s0_sq > 0.0)) throw std::domain_error("tau2_to_b: s0_sq must be > 0");
    return tau2 / (tau2 + s0_sq);
}

namespace detail {

inline double log_beta_pdf(double x, double a, double b) {
    double lp = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b);
    // skip zero-exponent terms so x at the support edge cannot yield 0 * -inf
    if (a != 1.0) lp += (a - 1.0) * std::log(x);
    if (b != 1.0) lp += (b - 1.0) * std::log1p(-x);
    return lp;
}

inline double log_gamma_pdf(double x, double shape, double rate) {
    return shape * std::log(rate) - std::lgamma(shape) +
           (shape - 1.0) * std::log(x) - rate * x;
}

}  // namespace detail

// Log density in the family's natural sampling parameterization, evaluated
// at the point corresponding to tau2.
inline double log_prior(const PriorSpec& prior, double tau2) {
    if (!(tau2 > 0.0)) throw std::domain_error("log_prior: tau2 must be > 0");
    return std::visit(
        [tau2](const auto& p) -> double {
            using T = std::decay_t<decltype(p)>;
            const double tau = std::sqrt(tau2);
            if constexpr (std::is_same_v<T, ParetoTau>) {
                return std::log(p.s0) - 2.0 * std::log(p.s0 + tau);
            } else if constexpr (std::is_same_v<T, HalfNormalTau>) {
                return std::log(2.0) -
                       0.5 * std::log(2.0 * std::numbers::pi * p.scale * p.scale) -
                       tau2 / (2.0 * p.scale * p.scale);
            } else if constexpr (std::is_same_v<T, RatioB>) {
                const double b = tau2 / (tau2 + p.s0_sq);
                return detail::log_beta_pdf(b, p.shape1, p.shape2);
            } else if constexpr (std::is_same_v<T, ScaledChiSqPrecision>) {
                // d * precision ~ chi^2_d, i.e. precision ~ Gamma(d/2, rate d/2)
                return detail::log_gamma_pdf(1.0 / tau2, p.d / 2.0, p.d / 2.0);
            } else {
                return detail::log_gamma_pdf(1.0 / tau2, p.a, p.b);
            }
        },
        prior);
}

// Same prior expressed as a density of tau (the between-study SD).
inline double log_prior_tau_space(const PriorSpec& prior, double tau) {
    if (!(tau > 0.0)) throw std::domain_error("log_prior_tau_space: tau must be > 0");
    const double tau2 = tau * tau;
    const double natural = log_prior(prior, tau2);
    return std::visit(
        [tau, tau2](const auto& p) -> double {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, ParetoTau> ||
                          std::is_same_v<T, HalfNormalTau>) {
                return 0.0;
            } else if constexpr (std::is_same_v<T, RatioB>) {
                // |dB/dtau| = 2 tau s0_sq / (tau2 + s0_sq)^2
                return std::log(2.0 * tau * p.s0_sq) - 2.0 * std::log(tau2 + p.s0_sq);
            } else {
                // |d(1/tau2)/dtau| = 2 / tau^3
                return std::log(2.0) - 3.0 * std::log(tau);
            }
        },
        prior) + natural;
}

inline double log_mu_prior(const MuPrior& prior, double mu) {
    return std::visit(
        [mu](const auto& p) -> double {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, FlatMu>) {
                return 0.0;
            } else {
                if (!(p.precision > 0.0))
                    throw std::domain_error("NormalMu: precision must be > 0");
                const double d = mu - p.mean;
                return 0.5 * std::log(p.precision / (2.0 * std::numbers::pi)) -
                       0.5 * p.precision * d * d;
            }
        },
        prior);
}

inline std::string prior_family_name(const PriorSpec& prior) {
    return std::visit(
        [](const auto& p) -> std::string {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, ParetoTau>) return "pareto";
            else if constexpr (std::is_same_v<T, HalfNormalTau>) return "halfnormal";
            else if constexpr (std::is_same_v<T, RatioB>)
                return (p.shape1 == 1.0 && p.shape2 == 1.0) ? "uniform" : "beta";
            else if constexpr (std::is_same_v<T, ScaledChiSqPrecision>) return "chisq";
            else return p.a <= 0.01 ? "gamma-weak" : "gamma-moderate";
        },
        prior);
}

}  // namespace pfmeta
