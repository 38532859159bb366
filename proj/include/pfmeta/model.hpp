#pragma once

// Two-level normal hierarchy:
//   PF_i | theta_i ~ N(theta_i, V_i)   (V_i known)
//   theta_i | mu, tau2 ~ N(mu, tau2)
// with a PriorSpec on the heterogeneity block and a MuPrior on mu.
// All full conditionals used by the Gibbs sweep live here.

#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

#include "pfmeta/classical.hpp"
#include "pfmeta/effect_size.hpp"
#include "pfmeta/priors.hpp"

namespace pfmeta {

struct ParameterState {
    double mu = 0.0;
    double tau2 = 1.0;
    std::vector<double> theta;
};

struct NormalParams {
    double mean = 0.0;
    double variance = 1.0;
};

struct GammaParams {
    double shape = 1.0;
    double rate = 1.0;
};

class HierarchicalModel {
  public:
    HierarchicalModel(std::vector<EffectEstimate> data, PriorSpec prior,
                      MuPrior mu_prior = FlatMu{})
        : data_(std::move(data)), prior_(std::move(prior)), mu_prior_(mu_prior) {
        if (data_.empty()) throw std::domain_error("HierarchicalModel: empty dataset");
        std::vector<double> variances;
        variances.reserve(data_.size());
        for (const auto& e : data_) variances.push_back(e.variance);
        s0_sq_ = harmonic_mean_s0sq(variances);
        validate_prior(prior_);
    }

    const std::vector<EffectEstimate>& data() const { return data_; }
    const PriorSpec& prior() const { return prior_; }
    const MuPrior& mu_prior() const { return mu_prior_; }
    double s0_sq() const { return s0_sq_; }
    std::size_t size() const { return data_.size(); }

  private:
    std::vector<EffectEstimate> data_;
    PriorSpec prior_;
    MuPrior mu_prior_;
    double s0_sq_ = 0.0;
};

inline double log_normal_pdf(double x, double mean, double variance) {
    const double d = x - mean;
    return -0.5 * std::log(2.0 * std::numbers::pi * variance) -
           d * d / (2.0 * variance);
}

// Observation layer only: sum_i log N(PF_i; theta_i, V_i).
inline double log_likelihood(const ParameterState& state,
                             std::span<const EffectEstimate> data) {
    if (state.theta.size() != data.size())
        throw std::domain_error("log_likelihood: theta length != dataset size");
    double ll = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i)
        ll += log_normal_pdf(data[i].pf, state.theta[i], data[i].variance);
    return ll;
}

// Conjugate update for one study effect given (mu, tau2).
inline NormalParams theta_full_conditional(double y_i, double v_i, double mu,
                                           double tau2) {
    if (!(v_i > 0.0)) throw std::domain_error("theta_full_conditional: V_i must be > 0");
    if (!(tau2 > 0.0))
        throw std::domain_error("theta_full_conditional: tau2 must be > 0");
    const double precision = 1.0 / v_i + 1.0 / tau2;
    return {(y_i / v_i + mu / tau2) / precision, 1.0 / precision};
}

// Conjugate update for mu given the study effects.
inline NormalParams mu_full_conditional(std::span<const double> theta, double tau2,
                                        const MuPrior& prior) {
    if (theta.empty()) throw std::domain_error("mu_full_conditional: empty theta");
    if (!(tau2 > 0.0)) throw std::domain_error("mu_full_conditional: tau2 must be > 0");
    double sum = 0.0;
    for (double t : theta) sum += t;
    const double k = static_cast<double>(theta.size());
    const double data_precision = k / tau2;
    const double data_mean = sum / k;
    return std::visit(
        [&](const auto& p) -> NormalParams {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, FlatMu>) {
                return {data_mean, tau2 / k};
            } else {
                const double precision = data_precision + p.precision;
                const double mean =
                    (data_precision * data_mean + p.precision * p.mean) / precision;
                return {mean, 1.0 / precision};
            }
        },
        prior);
}

// Gamma-normal conjugacy for the precision 1/tau2 under GammaPrecision priors.
inline GammaParams precision_full_conditional_gamma(std::span<const double> theta,
                                                    double mu, double a, double b) {
    if (theta.empty())
        throw std::domain_error("precision_full_conditional_gamma: empty theta");
    double ss = 0.0;
    for (double t : theta) {
        const double d = t - mu;
        ss += d * d;
    }
    return {a + static_cast<double>(theta.size()) / 2.0, b + 0.5 * ss};
}

// Joint log density of (data, theta, mu, heterogeneity block), the
// heterogeneity term in the family's natural parameterization. Composed
// strictly as the sum of its parts.
inline double joint_log_density(const HierarchicalModel& model,
                                const ParameterState& state) {
    if (!(state.tau2 > 0.0))
        throw std::domain_error("joint_log_density: tau2 must be > 0");
    double lp = log_likelihood(state, model.data());
    for (double t : state.theta) lp += log_normal_pdf(t, state.mu, state.tau2);
    lp += log_mu_prior(model.mu_prior(), state.mu);
    lp += log_prior(model.prior(), state.tau2);
    return lp;
}

}  // namespace pfmeta
