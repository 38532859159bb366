// Command-line front end: classical and Bayesian prevented-fraction
// meta-analysis over a study-summary CSV.

#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "pfmeta/forest_svg.hpp"
#include "pfmeta/oracle.hpp"
#include "pfmeta/report.hpp"
#include "pfmeta/report_io.hpp"

namespace fs = std::filesystem;

namespace {

int cmd_analyze(const std::string& dataset_path, const std::string& config_path,
                std::optional<std::uint64_t> seed,
                std::optional<std::string> prior, std::optional<std::string> out) {
    pfmeta::AnalysisConfig config;
    if (!config_path.empty()) config = pfmeta::parse_config_file(config_path);
    if (seed) config.mcmc.seed = *seed;
    if (prior) config.prior_families = {*prior};
    if (out) config.out_dir = *out;

    const pfmeta::Dataset dataset = pfmeta::parse_dataset(dataset_path);
    const pfmeta::ReportDoc doc = pfmeta::run_pipeline(dataset, config);

    fs::create_directories(config.out_dir);
    const fs::path dir(config.out_dir);
    pfmeta::emit_report(doc, (dir / "report.json").string(), "json");
    pfmeta::emit_report(doc, (dir / "report.txt").string(), "text-table");
    if (doc.fixed || doc.random)
        pfmeta::emit_forest_svg(doc, (dir / "forest.svg").string());

    std::cout << pfmeta::report_to_text(doc);
    std::cout << "\nwrote " << (dir / "report.json").string() << ", "
              << (dir / "report.txt").string();
    if (doc.fixed || doc.random) std::cout << ", " << (dir / "forest.svg").string();
    std::cout << "\n";
    for (const auto& b : doc.bayes)
        if (!b.converged) return 2;
    return 0;
}

int cmd_plot(const std::string& report_path, const std::string& out_path) {
    const pfmeta::ReportDoc doc = pfmeta::load_report(report_path);
    pfmeta::emit_forest_svg(doc, out_path);
    std::cout << "wrote " << out_path << "\n";
    return 0;
}

int cmd_oracle(const std::string& dataset_path, const std::string& prior) {
    const pfmeta::Dataset dataset = pfmeta::parse_dataset(dataset_path);
    std::vector<std::string> warnings;
    const auto estimates = dataset.estimates(&warnings);
    std::vector<double> variances;
    for (const auto& e : estimates) variances.push_back(e.variance);
    const double s0_sq = pfmeta::harmonic_mean_s0sq(variances);
    pfmeta::HierarchicalModel model(estimates, pfmeta::make_prior(prior, s0_sq));
    const pfmeta::GridPosterior post = pfmeta::grid_posterior_moments(model);

    std::printf("prior family: %s (s0_sq = %.6f)\n", prior.c_str(), s0_sq);
    std::printf("%-14s %12s %12s\n", "quantity", "mean", "sd");
    std::printf("%-14s %12.6f %12.6f\n", "mu", post.mu.mean, post.mu.sd);
    std::printf("%-14s %12.6f %12.6f\n", "tau2", post.tau2.mean, post.tau2.sd);
    for (std::size_t i = 0; i < estimates.size(); ++i)
        std::printf("%-14s %12.6f %12.6f\n", estimates[i].label.c_str(),
                    post.theta[i].mean, post.theta[i].sd);
    std::printf("log normalizing constant: %.6f\n", post.log_normalizing_constant);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Prevented-fraction meta-analysis"};
    app.require_subcommand(1);

    std::string dataset_path, config_path, prior_name, report_path, out_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> prior_opt, out_opt;

    auto* analyze = app.add_subcommand("analyze", "Run the analysis pipeline");
    analyze->add_option("dataset", dataset_path, "Study-summary CSV")->required();
    analyze->add_option("--config", config_path, "Flat key-value config file");
    analyze->add_option("--seed", seed, "Override the MCMC seed");
    analyze->add_option("--prior", prior_opt, "Run a single prior family");
    analyze->add_option("--out", out_opt, "Output directory");

    auto* plot = app.add_subcommand("plot", "Render a forest plot from a report");
    plot->add_option("report", report_path, "report.json from analyze")->required();
    plot->add_option("--out", out_path, "Output SVG path")->required();

    auto* oracle = app.add_subcommand("oracle", "Deterministic quadrature posterior");
    oracle->add_option("dataset", dataset_path, "Study-summary CSV")->required();
    oracle->add_option("--prior", prior_name, "Prior family")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (analyze->parsed())
            return cmd_analyze(dataset_path, config_path, seed, prior_opt, out_opt);
        if (plot->parsed()) return cmd_plot(report_path, out_path);
        if (oracle->parsed()) return cmd_oracle(dataset_path, prior_name);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
