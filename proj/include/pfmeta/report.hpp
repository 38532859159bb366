#pragma once

// Pipeline orchestration: analysis configuration, the seven named
// heterogeneity priors, report assembly and emission. The emitter never
// recomputes anything; every number in a report is an engine output.

#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "pfmeta/classical.hpp"
#include "pfmeta/dataset.hpp"
#include "pfmeta/mcmc.hpp"
#include "pfmeta/model.hpp"
#include "pfmeta/priors.hpp"

namespace pfmeta {

inline constexpr int kReportSchemaVersion = 1;

// Harmonic-mean variance reported alongside the source data; the report
// flags the dataset's deviation from it.
inline constexpr double kReferenceS0Sq = 0.0095;

inline const std::vector<std::string>& canonical_prior_families() {
    static const std::vector<std::string> names = {
        "pareto", "halfnormal", "uniform", "beta", "chisq", "gamma-weak",
        "gamma-moderate"};
    return names;
}

struct PriorParams {
    double d = 4.0;          // chisq degrees of freedom
    double beta1 = 0.9;      // RatioB shapes for the "beta" family
    double beta2 = 1.0;
    double gamma_a = 0.001;  // custom GammaPrecision, "gamma" family
    double gamma_b = 0.001;
};

inline PriorSpec make_prior(const std::string& family, double s0_sq,
                            const PriorParams& params = {}) {
    if (family == "pareto") return ParetoTau{std::sqrt(s0_sq)};
    if (family == "halfnormal") return HalfNormalTau{1.0};
    if (family == "uniform") return RatioB{1.0, 1.0, s0_sq};
    if (family == "beta") return RatioB{params.beta1, params.beta2, s0_sq};
    if (family == "chisq") return ScaledChiSqPrecision{params.d};
    if (family == "gamma-weak") return GammaPrecision{0.001, 0.001};
    if (family == "gamma-moderate") return GammaPrecision{0.1, 0.1};
    if (family == "gamma") return GammaPrecision{params.gamma_a, params.gamma_b};
    throw std::domain_error("unknown prior family '" + family + "'");
}

struct AnalysisConfig {
    bool run_fixed = true;
    bool run_random = true;
    bool run_bayes = true;
    std::vector<std::string> prior_families = canonical_prior_families();
    PriorParams prior_params;
    std::string mu_prior = "flat";  // "flat" | "normal"
    McmcConfig mcmc;
    std::string out_dir = ".";

    void validate() const {
        if (!run_fixed && !run_random && !run_bayes)
            throw std::domain_error("AnalysisConfig: no analysis selected");
        if (run_bayes && prior_families.empty())
            throw std::domain_error("AnalysisConfig: bayes selected but no priors");
        if (mu_prior != "flat" && mu_prior != "normal")
            throw std::domain_error("AnalysisConfig: mu_prior must be flat or normal");
        if (run_bayes) mcmc.validate();
    }

    MuPrior make_mu_prior() const {
        if (mu_prior == "normal") return NormalMu{0.0, 0.001};
        return FlatMu{};
    }
};

// Flat key-value config file: 'key = value', '#' comments. Key set is
// fixed; unknown keys are errors.
inline AnalysisConfig parse_config(std::istream& in) {
    AnalysisConfig cfg;
    std::string line;
    std::size_t line_no = 0;
    auto split_list = [](const std::string& s) {
        std::vector<std::string> out;
        std::string cur;
        for (char c : s) {
            if (c == ',') {
                if (!cur.empty()) out.push_back(detail::trim(cur));
                cur.clear();
            } else {
                cur += c;
            }
        }
        if (!detail::trim(cur).empty()) out.push_back(detail::trim(cur));
        return out;
    };
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = detail::trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("config line " + std::to_string(line_no) +
                                     ": expected 'key = value'");
        const std::string key = detail::trim(t.substr(0, eq));
        const std::string value = detail::trim(t.substr(eq + 1));
        try {
            if (key == "analyses") {
                cfg.run_fixed = cfg.run_random = cfg.run_bayes = false;
                for (const auto& a : split_list(value)) {
                    if (a == "fixed") cfg.run_fixed = true;
                    else if (a == "random") cfg.run_random = true;
                    else if (a == "bayes") cfg.run_bayes = true;
                    else throw std::runtime_error("unknown analysis '" + a + "'");
                }
            } else if (key == "prior.family") {
                cfg.prior_families = split_list(value);
            } else if (key == "prior.d") {
                cfg.prior_params.d = std::stod(value);
            } else if (key == "prior.beta1") {
                cfg.prior_params.beta1 = std::stod(value);
            } else if (key == "prior.beta2") {
                cfg.prior_params.beta2 = std::stod(value);
            } else if (key == "prior.gamma_a") {
                cfg.prior_params.gamma_a = std::stod(value);
            } else if (key == "prior.gamma_b") {
                cfg.prior_params.gamma_b = std::stod(value);
            } else if (key == "mu_prior") {
                cfg.mu_prior = value;
            } else if (key == "chains") {
                cfg.mcmc.chains = std::stoul(value);
            } else if (key == "iterations") {
                cfg.mcmc.iterations = std::stoul(value);
            } else if (key == "burn_in") {
                cfg.mcmc.burn_in = std::stoul(value);
            } else if (key == "thin") {
                cfg.mcmc.thin = std::stoul(value);
            } else if (key == "seed") {
                cfg.mcmc.seed = std::stoull(value);
            } else if (key == "out_dir") {
                cfg.out_dir = value;
            } else {
                throw std::runtime_error("unknown key '" + key + "'");
            }
        } catch (const std::invalid_argument&) {
            throw std::runtime_error("config line " + std::to_string(line_no) +
                                     ": bad value for '" + key + "'");
        }
    }
    return cfg;
}

inline AnalysisConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("parse_config_file: cannot open " + path);
    return parse_config(in);
}

struct BayesResult {
    std::string prior_family;
    double s0_sq = 0.0;
    bool converged = false;
    DiagnosticsReport diagnostics;
    double heterogeneity_acceptance = 1.0;
    // summaries keyed by quantity: "spf", "tau2", "precision", study labels
    std::vector<std::pair<std::string, PosteriorSummary>> summaries;
};

struct ReportDoc {
    AnalysisConfig config;
    std::vector<EffectEstimate> dataset;
    std::vector<std::string> warnings;
    std::optional<PooledResult> fixed;
    std::optional<PooledResult> random;
    std::optional<HeterogeneityStats> het;
    std::vector<BayesResult> bayes;
};

inline ReportDoc run_pipeline(const Dataset& dataset, const AnalysisConfig& config) {
    config.validate();
    ReportDoc doc;
    doc.config = config;
    doc.dataset = dataset.estimates(&doc.warnings);

    if (config.run_fixed) doc.fixed = fixed_effect_pool(doc.dataset);
    if ((config.run_random || config.run_fixed) && doc.dataset.size() >= 2)
        doc.het = heterogeneity(doc.dataset);
    if (config.run_random) {
        if (!doc.het) throw std::domain_error("random-effects pooling needs >= 2 studies");
        doc.random = random_effects_pool(doc.dataset, doc.het->tau2_dl);
    }

    if (config.run_bayes) {
        std::vector<double> variances;
        for (const auto& e : doc.dataset) variances.push_back(e.variance);
        const double s0_sq = harmonic_mean_s0sq(variances);
        if (std::abs(s0_sq - kReferenceS0Sq) > 1e-4) {
            std::ostringstream os;
            os << "harmonic-mean variance s0_sq = " << s0_sq
               << " deviates from the value " << kReferenceS0Sq
               << " reported alongside the source data";
            doc.warnings.push_back(os.str());
        }
        for (const auto& family : config.prior_families) {
            BayesResult res;
            res.prior_family = family;
            try {
                HierarchicalModel model(doc.dataset,
                                        make_prior(family, s0_sq, config.prior_params),
                                        config.make_mu_prior());
                res.s0_sq = model.s0_sq();
                const ChainSamples samples = run_chains(model, config.mcmc);
                res.heterogeneity_acceptance =
                    samples.chains.front().heterogeneity_acceptance;
                res.summaries.emplace_back("spf", summarize(samples, "mu"));
                res.summaries.emplace_back("tau2", summarize(samples, "tau2"));
                res.summaries.emplace_back("precision", summarize(samples, "precision"));
                for (std::size_t i = 0; i < doc.dataset.size(); ++i)
                    res.summaries.emplace_back(
                        doc.dataset[i].label,
                        summarize(samples, "theta_" + std::to_string(i + 1)));
                res.diagnostics = diagnostics_gate(res.summaries);
                res.converged = res.diagnostics.pass;
                if (!res.converged)
                    doc.warnings.push_back("bayes/" + family +
                                           ": diagnostics gate failed, marked "
                                           "non-converged");
            } catch (const std::exception& e) {
                throw std::runtime_error("analysis bayes/" + family + ": " + e.what());
            }
            doc.bayes.push_back(std::move(res));
        }
    }
    return doc;
}

// --- emission --------------------------------------------------------------

namespace detail {

inline nlohmann::json pooled_to_json(const PooledResult& r) {
    return {{"spf", r.spf},
            {"variance", r.variance},
            {"ci_lower", r.ci.lower},
            {"ci_upper", r.ci.upper},
            {"weights", r.weights},
            {"model", r.model == PoolModel::fixed ? "fixed" : "random"}};
}

inline nlohmann::json summary_to_json(const PosteriorSummary& s) {
    return {{"mean", s.mean}, {"sd", s.sd},     {"q025", s.q025},
            {"q975", s.q975}, {"ess", s.ess},   {"rhat", s.rhat}};
}

}  // namespace detail

inline nlohmann::json report_to_json(const ReportDoc& doc) {
    nlohmann::json j;
    j["schema_version"] = kReportSchemaVersion;
    j["config"] = {
        {"analyses",
         nlohmann::json::array()},
        {"mu_prior", doc.config.mu_prior},
        {"chains", doc.config.mcmc.chains},
        {"iterations", doc.config.mcmc.iterations},
        {"burn_in", doc.config.mcmc.burn_in},
        {"thin", doc.config.mcmc.thin},
        {"seed", doc.config.mcmc.seed},
        {"prior", {{"families", doc.config.prior_families},
                   {"d", doc.config.prior_params.d},
                   {"beta1", doc.config.prior_params.beta1},
                   {"beta2", doc.config.prior_params.beta2},
                   {"gamma_a", doc.config.prior_params.gamma_a},
                   {"gamma_b", doc.config.prior_params.gamma_b}}}};
    if (doc.config.run_fixed) j["config"]["analyses"].push_back("fixed");
    if (doc.config.run_random) j["config"]["analyses"].push_back("random");
    if (doc.config.run_bayes) j["config"]["analyses"].push_back("bayes");

    j["dataset"] = nlohmann::json::array();
    for (const auto& e : doc.dataset)
        j["dataset"].push_back(
            {{"label", e.label}, {"pf", e.pf}, {"variance", e.variance}});
    j["warnings"] = doc.warnings;

    if (doc.fixed) j["fixed"] = detail::pooled_to_json(*doc.fixed);
    if (doc.random) j["random"] = detail::pooled_to_json(*doc.random);
    if (doc.het)
        j["heterogeneity"] = {{"q", doc.het->q},
                              {"df", doc.het->df},
                              {"i_squared", doc.het->i_squared},
                              {"tau2_dl", doc.het->tau2_dl}};
    j["bayes"] = nlohmann::json::array();
    for (const auto& b : doc.bayes) {
        nlohmann::json jb;
        jb["prior"] = b.prior_family;
        jb["s0_sq"] = b.s0_sq;
        jb["converged"] = b.converged;
        jb["diagnostics"] = b.diagnostics.failures;
        jb["heterogeneity_acceptance"] = b.heterogeneity_acceptance;
        jb["summaries"] = nlohmann::json::array();
        for (const auto& [name, s] : b.summaries) {
            nlohmann::json js = detail::summary_to_json(s);
            js["parameter"] = name;
            jb["summaries"].push_back(js);
        }
        j["bayes"].push_back(jb);
    }
    return j;
}

inline std::string report_to_text(const ReportDoc& doc) {
    std::ostringstream os;
    char buf[160];
    os << "Prevented-fraction meta-analysis report\n";
    os << "=======================================\n\n";
    os << "Studies (" << doc.dataset.size() << "):\n";
    for (const auto& e : doc.dataset) {
        std::snprintf(buf, sizeof buf, "  %-14s pf %9.4f  var %9.6f\n",
                      e.label.c_str(), e.pf, e.variance);
        os << buf;
    }
    auto pooled_table = [&](const char* title, const PooledResult& r) {
        os << "\n" << title << ":\n";
        os << "  SPF        Var        CI low     CI high\n";
        std::snprintf(buf, sizeof buf, "  %-10.4f %-10.6f %-10.4f %-10.4f\n", r.spf,
                      r.variance, r.ci.lower, r.ci.upper);
        os << buf;
    };
    if (doc.fixed) pooled_table("Fixed-effect pooling", *doc.fixed);
    if (doc.random) pooled_table("Random-effects pooling (DerSimonian-Laird)", *doc.random);
    if (doc.het) {
        std::snprintf(buf, sizeof buf,
                      "\nHeterogeneity: Q = %.4f (df %zu), I2 = %.4f, DL tau2 = %.6f\n",
                      doc.het->q, doc.het->df, doc.het->i_squared, doc.het->tau2_dl);
        os << buf;
    }
    for (const auto& b : doc.bayes) {
        os << "\nBayesian analysis, prior family '" << b.prior_family << "'";
        std::snprintf(buf, sizeof buf, " (s0_sq = %.6f, %s)\n", b.s0_sq,
                      b.converged ? "converged" : "NOT CONVERGED");
        os << buf;
        os << "  Parameter      Mean       SD         2.5% CI    97.5% CI   ESS      Rhat\n";
        for (const auto& [name, s] : b.summaries) {
            std::snprintf(buf, sizeof buf,
                          "  %-14s %-10.4f %-10.4f %-10.4f %-10.4f %-8.0f %.4f\n",
                          name.c_str(), s.mean, s.sd, s.q025, s.q975, s.ess, s.rhat);
            os << buf;
        }
    }
    if (!doc.warnings.empty()) {
        os << "\nWarnings:\n";
        for (const auto& w : doc.warnings) os << "  - " << w << "\n";
    }
    return os.str();
}

inline void emit_report(const ReportDoc& doc, const std::string& path,
                        const std::string& format) {
    std::string payload;
    if (format == "json") {
        payload = report_to_json(doc).dump(2);
        payload += '\n';
    } else if (format == "text-table") {
        payload = report_to_text(doc);
    } else {
        throw std::domain_error("emit_report: unknown format '" + format + "'");
    }
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("emit_report: cannot open " + path);
    os << payload;
}

}  // namespace pfmeta
