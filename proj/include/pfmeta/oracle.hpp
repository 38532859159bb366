#pragma once

// Deterministic posterior verification by 2-D quadrature. Study effects are
// marginalized analytically (PF_i ~ N(mu, V_i + tau2)), leaving a (mu, tau)
// surface integrated by the trapezoid rule: mu on a linear grid, tau on a
// log-spaced grid with the log Jacobian folded into the integrand.
// Accumulation order is pinned row-major, left to right.

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "pfmeta/model.hpp"

namespace pfmeta {

struct GridSpec {
    double mu_lo = -4.0;
    double mu_hi = 3.0;
    std::size_t mu_points = 400;
    double tau_lo = 1e-6;
    double tau_hi = 15.0;
    std::size_t tau_points = 400;

    void validate() const {
        if (!(mu_lo < mu_hi) || !(tau_lo < tau_hi))
            throw std::domain_error("GridSpec: lo must be < hi");
        if (mu_points < 200 || tau_points < 200)
            throw std::domain_error("GridSpec: point counts must be >= 200");
        if (!(tau_lo > 0.0)) throw std::domain_error("GridSpec: tau lo must be > 0");
    }
};

// sum_i log N(PF_i; mu, V_i + tau2)
inline double marginal_loglik(double mu, double tau2,
                              std::span<const EffectEstimate> data) {
    if (tau2 < 0.0) throw std::domain_error("marginal_loglik: negative tau2");
    double ll = 0.0;
    for (const auto& e : data)
        ll += log_normal_pdf(e.pf, mu, e.variance + tau2);
    return ll;
}

struct MomentPair {
    double mean = 0.0;
    double sd = 0.0;
};

struct GridPosterior {
    MomentPair mu;
    MomentPair tau2;
    std::vector<MomentPair> theta;
    double log_normalizing_constant = 0.0;
};

inline constexpr double kBoundaryMassLimit = 1e-8;

inline GridPosterior grid_posterior_moments(const HierarchicalModel& model,
                                            const GridSpec& grid = {}) {
    grid.validate();
    const std::size_t nm = grid.mu_points;
    const std::size_t nt = grid.tau_points;
    const std::size_t k = model.size();

    std::vector<double> mus(nm), us(nt), taus(nt);
    for (std::size_t i = 0; i < nm; ++i)
        mus[i] = grid.mu_lo + (grid.mu_hi - grid.mu_lo) * static_cast<double>(i) /
                                  static_cast<double>(nm - 1);
    const double u_lo = std::log(grid.tau_lo);
    const double u_hi = std::log(grid.tau_hi);
    for (std::size_t j = 0; j < nt; ++j) {
        us[j] = u_lo + (u_hi - u_lo) * static_cast<double>(j) /
                           static_cast<double>(nt - 1);
        taus[j] = std::exp(us[j]);
    }

    // log integrand over (mu, u = log tau); + log tau is the Jacobian
    std::vector<double> lp(nm * nt);
    double lp_max = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < nm; ++i) {
        const double mu_prior_term = log_mu_prior(model.mu_prior(), mus[i]);
        for (std::size_t j = 0; j < nt; ++j) {
            const double tau = taus[j];
            const double v = marginal_loglik(mus[i], tau * tau, model.data()) +
                             log_prior_tau_space(model.prior(), tau) +
                             mu_prior_term + us[j];
            lp[i * nt + j] = v;
            if (v > lp_max) lp_max = v;
        }
    }

    double boundary_max = 0.0;
    for (std::size_t j = 0; j < nt; ++j) {
        boundary_max = std::max(boundary_max, std::exp(lp[j] - lp_max));
        boundary_max = std::max(boundary_max, std::exp(lp[(nm - 1) * nt + j] - lp_max));
    }
    for (std::size_t i = 0; i < nm; ++i) {
        boundary_max = std::max(boundary_max, std::exp(lp[i * nt] - lp_max));
        boundary_max = std::max(boundary_max, std::exp(lp[i * nt + nt - 1] - lp_max));
    }
    if (boundary_max >= kBoundaryMassLimit)
        throw std::domain_error(
            "grid_posterior_moments: posterior density at the grid boundary is " +
            std::to_string(boundary_max) +
            " of the peak; widen the grid until it falls below 1e-8");

    const double dmu = (grid.mu_hi - grid.mu_lo) / static_cast<double>(nm - 1);
    const double du = (u_hi - u_lo) / static_cast<double>(nt - 1);

    double z = 0.0;
    double s_mu = 0.0, s_mu2 = 0.0, s_t2 = 0.0, s_t4 = 0.0;
    std::vector<double> s_th(k, 0.0), s_th2(k, 0.0);
    for (std::size_t i = 0; i < nm; ++i) {
        const double wm = (i == 0 || i == nm - 1) ? 0.5 : 1.0;
        for (std::size_t j = 0; j < nt; ++j) {
            const double wt = (j == 0 || j == nt - 1) ? 0.5 : 1.0;
            const double g = wm * wt * std::exp(lp[i * nt + j] - lp_max);
            if (g == 0.0) continue;
            const double mu = mus[i];
            const double tau2 = taus[j] * taus[j];
            z += g;
            s_mu += g * mu;
            s_mu2 += g * mu * mu;
            s_t2 += g * tau2;
            s_t4 += g * tau2 * tau2;
            for (std::size_t s = 0; s < k; ++s) {
                const NormalParams fc = theta_full_conditional(
                    model.data()[s].pf, model.data()[s].variance, mu, tau2);
                s_th[s] += g * fc.mean;
                s_th2[s] += g * (fc.variance + fc.mean * fc.mean);
            }
        }
    }
    if (!(z > 0.0))
        throw std::domain_error("grid_posterior_moments: zero posterior mass on grid");

    GridPosterior out;
    auto moments = [z](double s1, double s2) {
        const double mean = s1 / z;
        const double var = std::max(0.0, s2 / z - mean * mean);
        return MomentPair{mean, std::sqrt(var)};
    };
    out.mu = moments(s_mu, s_mu2);
    out.tau2 = moments(s_t2, s_t4);
    out.theta.reserve(k);
    for (std::size_t s = 0; s < k; ++s) out.theta.push_back(moments(s_th[s], s_th2[s]));
    out.log_normalizing_constant = lp_max + std::log(z * dmu * du);
    return out;
}

}  // namespace pfmeta
