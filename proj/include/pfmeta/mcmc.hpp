#pragma once

// Blocked Gibbs sampler for the hierarchical model. Study effects and the
// pooled mean use conjugate normal draws; the heterogeneity block uses a
// conjugate Gamma draw where available (GammaPrecision) and univariate
// slice sampling in the family's natural parameterization otherwise.
// A random-walk Metropolis kernel is kept behind a config switch.
//
// Chain c draws from an RNG stream seeded with (seed, c) and shares no
// state with other chains, so serial and parallel execution produce the
// same bits.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <future>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "pfmeta/model.hpp"

namespace pfmeta {

enum class HeterogeneityKernel { slice, metropolis };

struct McmcConfig {
    std::size_t chains = 4;
    std::size_t iterations = 30000;
    std::size_t burn_in = 10000;
    std::size_t thin = 1;
    std::uint64_t seed = 20240101;
    double step_scale = 0.25;
    HeterogeneityKernel kernel = HeterogeneityKernel::slice;
    bool parallel_chains = true;

    std::size_t retained_per_chain() const { return (iterations - burn_in) / thin; }

    void validate() const {
        if (chains < 2) throw std::domain_error("McmcConfig: chains must be >= 2");
        if (burn_in >= iterations)
            throw std::domain_error("McmcConfig: burn_in must be < iterations");
        if (thin < 1) throw std::domain_error("McmcConfig: thin must be >= 1");
        if (!(step_scale > 0.0))
            throw std::domain_error("McmcConfig: step_scale must be > 0");
    }
};

struct Chain {
    std::vector<double> mu;
    std::vector<double> tau2;
    std::vector<std::vector<double>> theta;  // [study][draw]
    double heterogeneity_acceptance = 1.0;   // 1 for conjugate / slice updates
};

struct ChainSamples {
    std::vector<Chain> chains;
    std::size_t n_studies = 0;

    std::size_t retained_per_chain() const {
        return chains.empty() ? 0 : chains.front().mu.size();
    }
    std::size_t total_retained() const {
        return chains.size() * retained_per_chain();
    }
};

struct PosteriorSummary {
    double mean = 0.0;
    double sd = 0.0;
    double q025 = 0.0;
    double q975 = 0.0;
    double ess = 0.0;
    double rhat = 1.0;
};

inline constexpr std::size_t kSliceExpansionLimit = 1'000'000;

// Univariate slice sampler, step-out + shrinkage. The target returns
// -infinity outside its support; (lo, hi) bound the step-out so unbounded
// tails cannot run away.
inline double slice_sample(const std::function<double(double)>& log_target,
                           double x0, double width, double lo, double hi,
                           std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::exponential_distribution<double> expo(1.0);
    const double log_fx0 = log_target(x0);
    if (!std::isfinite(log_fx0))
        throw std::runtime_error("slice_sample: non-finite log density at current point");
    const double log_y = log_fx0 - expo(rng);

    double left = x0 - width * unif(rng);
    double right = left + width;
    std::size_t steps = 0;
    auto bump = [&steps]() {
        if (++steps > kSliceExpansionLimit)
            throw std::runtime_error("slice_sample: step-out exceeded expansion limit");
    };
    while (left > lo && log_target(left) > log_y) {
        left -= width;
        bump();
    }
    left = std::max(left, lo);
    while (right < hi && log_target(right) > log_y) {
        right += width;
        bump();
    }
    right = std::min(right, hi);

    while (true) {
        const double x1 = left + unif(rng) * (right - left);
        if (log_target(x1) > log_y) return x1;
        if (x1 < x0)
            left = x1;
        else
            right = x1;
        bump();
    }
}

namespace detail {

// Log conditional density of the heterogeneity block given (theta, mu),
// expressed in the family's sampling parameterization. `ss` is
// sum (theta_i - mu)^2 and k the study count.
struct HeterogeneityTarget {
    const PriorSpec* prior;
    double ss;
    double k;
    double s0_sq;

    // tau-space families
    double in_tau(double tau) const {
        if (!(tau > 0.0)) return -std::numeric_limits<double>::infinity();
        const double tau2 = tau * tau;
        return log_prior(*prior, tau2) - 0.5 * k * std::log(tau2) -
               ss / (2.0 * tau2);
    }
    // B-space (RatioB)
    double in_b(double b) const {
        if (!(b > 0.0 && b < 1.0)) return -std::numeric_limits<double>::infinity();
        const double tau2 = b * s0_sq / (1.0 - b);
        return log_prior(*prior, tau2) - 0.5 * k * std::log(tau2) -
               ss / (2.0 * tau2);
    }
    // precision-space (ScaledChiSqPrecision when not conjugate-drawn)
    double in_precision(double p) const {
        if (!(p > 0.0)) return -std::numeric_limits<double>::infinity();
        return log_prior(*prior, 1.0 / p) + 0.5 * k * std::log(p) - 0.5 * ss * p;
    }
};

struct BlockCounters {
    std::size_t proposals = 0;
    std::size_t accepts = 0;
};

// One heterogeneity-block update; returns the new tau2.
inline double update_heterogeneity(const HierarchicalModel& model,
                                   const ParameterState& state, double ss,
                                   const McmcConfig& config, std::mt19937_64& rng,
                                   BlockCounters& counters) {
    const double k = static_cast<double>(model.size());
    HeterogeneityTarget target{&model.prior(), ss, k, model.s0_sq()};
    const double inf = std::numeric_limits<double>::infinity();

    if (const auto* gp = std::get_if<GammaPrecision>(&model.prior())) {
        const GammaParams g =
            precision_full_conditional_gamma(state.theta, state.mu, gp->a, gp->b);
        std::gamma_distribution<double> dist(g.shape, 1.0 / g.rate);
        const double p = dist(rng);
        if (!(p > 0.0))
            throw std::runtime_error("heterogeneity update: degenerate Gamma draw");
        return 1.0 / p;
    }

    // current point, width and transform per parameterization
    std::function<double(double)> log_target;
    double x0 = 0.0, width = config.step_scale, lo = 0.0, hi = inf;
    std::function<double(double)> to_tau2;
    if (std::holds_alternative<RatioB>(model.prior())) {
        x0 = tau2_to_b(state.tau2, model.s0_sq());
        width = std::min(config.step_scale, 0.25);
        hi = 1.0;
        log_target = [target](double b) { return target.in_b(b); };
        const double s0_sq = model.s0_sq();
        to_tau2 = [s0_sq](double b) { return b_to_tau2(b, s0_sq); };
    } else if (std::holds_alternative<ScaledChiSqPrecision>(model.prior())) {
        x0 = 1.0 / state.tau2;
        width = 4.0 * config.step_scale;
        log_target = [target](double p) { return target.in_precision(p); };
        to_tau2 = [](double p) { return 1.0 / p; };
    } else {  // ParetoTau, HalfNormalTau
        x0 = std::sqrt(state.tau2);
        log_target = [target](double tau) { return target.in_tau(tau); };
        to_tau2 = [](double tau) { return tau * tau; };
    }

    if (config.kernel == HeterogeneityKernel::slice) {
        counters.proposals += 1;
        counters.accepts += 1;
        return to_tau2(slice_sample(log_target, x0, width, lo, hi, rng));
    }

    // random-walk Metropolis fallback
    std::normal_distribution<double> step(0.0, width);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double x1 = x0 + step(rng);
    counters.proposals += 1;
    const double lp0 = log_target(x0);
    const double lp1 = log_target(x1);
    if (std::isfinite(lp1) && std::log(unif(rng)) < lp1 - lp0) {
        counters.accepts += 1;
        return to_tau2(x1);
    }
    return to_tau2(x0);
}

inline std::string dump_state(const ParameterState& state) {
    std::ostringstream os;
    os << "mu=" << state.mu << " tau2=" << state.tau2 << " theta=[";
    for (std::size_t i = 0; i < state.theta.size(); ++i)
        os << (i ? "," : "") << state.theta[i];
    os << "]";
    return os.str();
}

inline Chain run_single_chain(const HierarchicalModel& model,
                              const McmcConfig& config, std::size_t chain_index) {
    std::seed_seq seq{static_cast<std::uint32_t>(config.seed & 0xffffffffu),
                      static_cast<std::uint32_t>(config.seed >> 32),
                      static_cast<std::uint32_t>(chain_index)};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> std_normal(0.0, 1.0);

    const std::size_t k = model.size();
    ParameterState state;
    state.theta.resize(k);
    // data-driven starts: theta at the observed effects, mu at the
    // fixed-effect pool, tau2 at max(DL, s0_sq/10)
    for (std::size_t i = 0; i < k; ++i) state.theta[i] = model.data()[i].pf;
    state.mu = fixed_effect_pool(model.data()).spf;
    state.tau2 = (k >= 2) ? std::max(dl_tau2(model.data()), model.s0_sq() / 10.0)
                          : model.s0_sq();

    const std::size_t retained = config.retained_per_chain();
    Chain chain;
    chain.mu.reserve(retained);
    chain.tau2.reserve(retained);
    chain.theta.assign(k, {});
    for (auto& t : chain.theta) t.reserve(retained);
    BlockCounters counters;

    for (std::size_t iter = 0; iter < config.iterations; ++iter) {
        for (std::size_t i = 0; i < k; ++i) {
            const NormalParams fc = theta_full_conditional(
                model.data()[i].pf, model.data()[i].variance, state.mu, state.tau2);
            state.theta[i] = fc.mean + std::sqrt(fc.variance) * std_normal(rng);
        }
        const NormalParams mu_fc =
            mu_full_conditional(state.theta, state.tau2, model.mu_prior());
        state.mu = mu_fc.mean + std::sqrt(mu_fc.variance) * std_normal(rng);

        double ss = 0.0;
        for (double t : state.theta) {
            const double d = t - state.mu;
            ss += d * d;
        }
        try {
            state.tau2 = update_heterogeneity(model, state, ss, config, rng, counters);
        } catch (const std::runtime_error& e) {
            throw std::runtime_error(std::string(e.what()) + " at state " +
                                     dump_state(state));
        }
        if (!std::isfinite(state.mu) || !std::isfinite(state.tau2))
            throw std::runtime_error("run_chains: non-finite state at " +
                                     dump_state(state));

        if (iter >= config.burn_in && (iter - config.burn_in) % config.thin == 0) {
            chain.mu.push_back(state.mu);
            chain.tau2.push_back(state.tau2);
            for (std::size_t i = 0; i < k; ++i)
                chain.theta[i].push_back(state.theta[i]);
        }
    }
    chain.heterogeneity_acceptance =
        counters.proposals
            ? static_cast<double>(counters.accepts) / counters.proposals
            : 1.0;
    return chain;
}

}  // namespace detail

inline ChainSamples run_chains(const HierarchicalModel& model,
                               const McmcConfig& config) {
    config.validate();
    ChainSamples samples;
    samples.n_studies = model.size();
    samples.chains.resize(config.chains);
    if (config.parallel_chains) {
        std::vector<std::future<Chain>> futures;
        futures.reserve(config.chains);
        for (std::size_t c = 0; c < config.chains; ++c)
            futures.push_back(std::async(std::launch::async, [&model, &config, c] {
                return detail::run_single_chain(model, config, c);
            }));
        for (std::size_t c = 0; c < config.chains; ++c)
            samples.chains[c] = futures[c].get();
    } else {
        for (std::size_t c = 0; c < config.chains; ++c)
            samples.chains[c] = detail::run_single_chain(model, config, c);
    }
    return samples;
}

// --- summaries -------------------------------------------------------------

// Interpolated order statistic (type-7 convention) on an already-sorted
// sample.
inline double quantile_sorted(std::span<const double> sorted, double p) {
    if (sorted.empty()) throw std::domain_error("quantile_sorted: empty sample");
    const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

namespace detail {

// ESS of one chain: n / (1 + 2 sum rho_t), the autocorrelation sum
// truncated at the first lag pair with nonpositive total.
inline double chain_ess(std::span<const double> x) {
    const std::size_t n = x.size();
    if (n < 2) return static_cast<double>(n);
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(n);
    double c0 = 0.0;
    for (double v : x) c0 += (v - mean) * (v - mean);
    c0 /= static_cast<double>(n);
    if (c0 == 0.0) return static_cast<double>(n);

    auto gamma_at = [&](std::size_t lag) {
        double s = 0.0;
        for (std::size_t t = 0; t + lag < n; ++t)
            s += (x[t] - mean) * (x[t + lag] - mean);
        return s / static_cast<double>(n);
    };
    double rho_sum = 0.0;
    for (std::size_t lag = 1; lag + 1 < n; lag += 2) {
        const double pair = gamma_at(lag) + gamma_at(lag + 1);
        if (pair <= 0.0) break;
        rho_sum += pair / c0;
    }
    return static_cast<double>(n) / (1.0 + 2.0 * rho_sum);
}

inline double gelman_rubin_rhat(const std::vector<std::span<const double>>& chains) {
    const std::size_t m = chains.size();
    const std::size_t n = chains.front().size();
    std::vector<double> means(m), vars(m);
    for (std::size_t j = 0; j < m; ++j) {
        double mean = 0.0;
        for (double v : chains[j]) mean += v;
        mean /= static_cast<double>(n);
        double var = 0.0;
        for (double v : chains[j]) var += (v - mean) * (v - mean);
        var /= static_cast<double>(n - 1);
        means[j] = mean;
        vars[j] = var;
    }
    double w = 0.0;
    for (double v : vars) w += v;
    w /= static_cast<double>(m);
    double grand = 0.0;
    for (double v : means) grand += v;
    grand /= static_cast<double>(m);
    double b_over_n = 0.0;
    for (double v : means) b_over_n += (v - grand) * (v - grand);
    b_over_n /= static_cast<double>(m - 1);
    if (w == 0.0) return 1.0;  // zero-variance chains by convention
    const double var_plus =
        (static_cast<double>(n - 1) / static_cast<double>(n)) * w + b_over_n;
    return std::sqrt(var_plus / w);
}

}  // namespace detail

// Extracts one scalar series per chain. Known names: "mu", "tau2",
// "precision" (1/tau2), "theta_<i>" with i in 1..k.
inline std::vector<std::vector<double>> extract_series(const ChainSamples& samples,
                                                       const std::string& quantity) {
    std::vector<std::vector<double>> out;
    out.reserve(samples.chains.size());
    for (const auto& chain : samples.chains) {
        if (quantity == "mu") {
            out.push_back(chain.mu);
        } else if (quantity == "tau2") {
            out.push_back(chain.tau2);
        } else if (quantity == "precision") {
            std::vector<double> p;
            p.reserve(chain.tau2.size());
            for (double t2 : chain.tau2) p.push_back(1.0 / t2);
            out.push_back(std::move(p));
        } else if (quantity.rfind("theta_", 0) == 0) {
            const std::size_t idx = std::stoul(quantity.substr(6));
            if (idx < 1 || idx > samples.n_studies)
                throw std::domain_error("summarize: unknown quantity " + quantity);
            out.push_back(chain.theta[idx - 1]);
        } else {
            throw std::domain_error("summarize: unknown quantity " + quantity);
        }
    }
    return out;
}

inline PosteriorSummary summarize(const ChainSamples& samples,
                                  const std::string& quantity) {
    if (samples.chains.size() < 2)
        throw std::domain_error("summarize: needs at least 2 chains");
    if (samples.total_retained() < 1000)
        throw std::domain_error("summarize: needs at least 1000 retained draws");
    const auto series = extract_series(samples, quantity);

    std::vector<double> pooled;
    pooled.reserve(samples.total_retained());
    for (const auto& s : series) pooled.insert(pooled.end(), s.begin(), s.end());

    PosteriorSummary out;
    double mean = 0.0;
    for (double v : pooled) mean += v;
    mean /= static_cast<double>(pooled.size());
    double var = 0.0;
    for (double v : pooled) var += (v - mean) * (v - mean);
    var /= static_cast<double>(pooled.size() - 1);
    out.mean = mean;
    out.sd = std::sqrt(var);

    std::sort(pooled.begin(), pooled.end());
    out.q025 = quantile_sorted(pooled, 0.025);
    out.q975 = quantile_sorted(pooled, 0.975);

    out.ess = 0.0;
    for (const auto& s : series) out.ess += detail::chain_ess(s);
    std::vector<std::span<const double>> views;
    views.reserve(series.size());
    for (const auto& s : series) views.emplace_back(s);
    out.rhat = detail::gelman_rubin_rhat(views);
    return out;
}

// --- diagnostics gate ------------------------------------------------------

struct DiagnosticsReport {
    bool pass = true;
    std::vector<std::string> failures;
};

inline DiagnosticsReport diagnostics_gate(
    const std::vector<std::pair<std::string, PosteriorSummary>>& summaries,
    double rhat_limit = 1.01, double ess_floor = 400.0) {
    DiagnosticsReport report;
    for (const auto& [name, s] : summaries) {
        if (s.rhat > rhat_limit) {
            report.pass = false;
            report.failures.push_back(name + ": rhat " + std::to_string(s.rhat) +
                                      " > " + std::to_string(rhat_limit));
        }
        if (s.ess < ess_floor) {
            report.pass = false;
            report.failures.push_back(name + ": ess " + std::to_string(s.ess) +
                                      " < " + std::to_string(ess_floor));
        }
    }
    return report;
}

// Flat columnar dump: one row per retained draw.
inline void dump_samples(const ChainSamples& samples, std::ostream& os) {
    os << "chain iter mu tau2";
    for (std::size_t i = 1; i <= samples.n_studies; ++i) os << " theta_" << i;
    os << "\n";
    char buf[32];
    auto put = [&](double v) {
        std::snprintf(buf, sizeof buf, " %.17g", v);
        os << buf;
    };
    for (std::size_t c = 0; c < samples.chains.size(); ++c) {
        const Chain& chain = samples.chains[c];
        for (std::size_t t = 0; t < chain.mu.size(); ++t) {
            os << c << " " << t;
            put(chain.mu[t]);
            put(chain.tau2[t]);
            for (std::size_t i = 0; i < samples.n_studies; ++i)
                put(chain.theta[i][t]);
            os << "\n";
        }
    }
}

inline void dump_samples(const ChainSamples& samples, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("dump_samples: cannot open " + path);
    dump_samples(samples, os);
}

}  // namespace pfmeta
