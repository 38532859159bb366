#pragma once

// Prevented-fraction effect sizes: conversion of per-study summaries
// (raw arm statistics or reported confidence intervals) into point
// estimates with sampling variances.

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace pfmeta {

// 95% normal quantile, fixed by convention so that interval round-trips
// are bit-reproducible.
inline constexpr double kZ95 = 1.96;

struct ArmStats {
    double mean_t = 0.0;
    double sd_t = 0.0;
    long n_t = 0;
    double mean_c = 0.0;
    double sd_c = 0.0;
    long n_c = 0;
};

struct ReportedEffect {
    double pf = 0.0;
    double ci_lower = 0.0;
    double ci_upper = 0.0;
};

struct StudyRecord {
    std::string label;
    std::optional<ArmStats> arms;
    std::optional<ReportedEffect> reported;
    std::string provenance;
};

// One study's prevented fraction with its sampling variance; the unit of
// pooling everywhere downstream.
struct EffectEstimate {
    std::string label;
    double pf = 0.0;
    double variance = 0.0;
};

// PF = RR - 1 = mean_t / mean_c - 1.
inline double compute_pf(double mean_t, double mean_c,
                         const std::string& label = {}) {
    if (!(mean_c > 0.0)) {
        throw std::domain_error("compute_pf: nonpositive control mean" +
                                (label.empty() ? "" : " in study " + label));
    }
    if (mean_t < 0.0) {
        throw std::domain_error("compute_pf: negative treatment mean" +
                                (label.empty() ? "" : " in study " + label));
    }
    return mean_t / mean_c - 1.0;
}

// First-order (delta method) variance of the ratio of two independent
// sample means:
//   Var(PF) ~= (sd_t^2/n_t)/mean_c^2 + (mean_t^2 * sd_c^2/n_c)/mean_c^4
inline double pf_variance(double mean_t, double sd_t, long n_t, double mean_c,
                          double sd_c, long n_c,
                          const std::string& label = {}) {
    if (!(mean_c > 0.0)) {
        throw std::domain_error("pf_variance: nonpositive control mean" +
                                (label.empty() ? "" : " in study " + label));
    }
    if (!(sd_t > 0.0) || !(sd_c > 0.0)) {
        throw std::domain_error("pf_variance: standard deviations must be positive" +
                                (label.empty() ? "" : " in study " + label));
    }
    if (n_t < 2 || n_c < 2) {
        throw std::domain_error("pf_variance: arm sizes must be >= 2" +
                                (label.empty() ? "" : " in study " + label));
    }
    const double mc2 = mean_c * mean_c;
    const double term_t = (sd_t * sd_t / static_cast<double>(n_t)) / mc2;
    const double term_c =
        (mean_t * mean_t * sd_c * sd_c / static_cast<double>(n_c)) / (mc2 * mc2);
    return term_t + term_c;
}

// Back-converts a symmetric 95% interval to a sampling variance.
inline double ci_to_variance(double ci_lower, double ci_upper) {
    if (!(ci_lower < ci_upper)) {
        throw std::domain_error("ci_to_variance: degenerate interval");
    }
    const double se = (ci_upper - ci_lower) / (2.0 * kZ95);
    return se * se;
}

struct Interval {
    double lower = 0.0;
    double upper = 0.0;
};

inline Interval variance_to_ci(double pf, double variance) {
    if (!(variance > 0.0)) {
        throw std::domain_error("variance_to_ci: variance must be positive");
    }
    const double half = kZ95 * std::sqrt(variance);
    return {pf - half, pf + half};
}

// Cross-check thresholds for studies carrying both raw arm statistics and a
// reported interval.
inline constexpr double kPfMismatchTol = 0.02;
inline constexpr double kVarMismatchRelTol = 0.25;

// Turns a StudyRecord into an EffectEstimate. Arm statistics take precedence
// when both ingestion paths are present; a disagreement beyond the
// thresholds above is reported through `warnings` but does not stop the run.
inline EffectEstimate make_estimate(const StudyRecord& rec,
                                    std::vector<std::string>* warnings = nullptr) {
    if (!rec.arms && !rec.reported) {
        throw std::domain_error("study " + rec.label +
                                ": neither arm statistics nor reported effect present");
    }
    EffectEstimate est;
    est.label = rec.label;
    if (rec.arms) {
        const ArmStats& a = *rec.arms;
        est.pf = compute_pf(a.mean_t, a.mean_c, rec.label);
        est.variance =
            pf_variance(a.mean_t, a.sd_t, a.n_t, a.mean_c, a.sd_c, a.n_c, rec.label);
        if (rec.reported && warnings) {
            const ReportedEffect& r = *rec.reported;
            const double v_reported = ci_to_variance(r.ci_lower, r.ci_upper);
            const bool pf_off = std::abs(est.pf - r.pf) > kPfMismatchTol;
            const bool var_off =
                std::abs(est.variance - v_reported) > kVarMismatchRelTol * v_reported;
            if (pf_off || var_off) {
                warnings->push_back(
                    "study " + rec.label +
                    ": arm-derived effect disagrees with the reported interval; "
                    "arm-derived values used");
            }
        }
    } else {
        const ReportedEffect& r = *rec.reported;
        est.pf = r.pf;
        est.variance = ci_to_variance(r.ci_lower, r.ci_upper);
    }
    if (est.pf < -1.0) {
        throw std::domain_error("study " + rec.label +
                                ": pf < -1 is not attainable from nonnegative means");
    }
    return est;
}

}  // namespace pfmeta
