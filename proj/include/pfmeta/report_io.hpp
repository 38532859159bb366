#pragma once

// Reading a previously emitted report back in (only the parts the plotter
// needs: dataset echo, pooled results, warnings).

#include <string>

#include <json.hpp>

#include "pfmeta/report.hpp"

namespace pfmeta {

inline ReportDoc report_doc_from_json(const nlohmann::json& j) {
    if (!j.contains("schema_version") || j["schema_version"].get<int>() != kReportSchemaVersion)
        throw std::runtime_error("report_doc_from_json: unsupported schema version");
    ReportDoc doc;
    for (const auto& e : j.at("dataset"))
        doc.dataset.push_back({e.at("label").get<std::string>(),
                               e.at("pf").get<double>(),
                               e.at("variance").get<double>()});
    if (j.contains("warnings"))
        doc.warnings = j["warnings"].get<std::vector<std::string>>();
    auto read_pooled = [](const nlohmann::json& p) {
        PooledResult r;
        r.spf = p.at("spf").get<double>();
        r.variance = p.at("variance").get<double>();
        r.ci = {p.at("ci_lower").get<double>(), p.at("ci_upper").get<double>()};
        r.weights = p.at("weights").get<std::vector<double>>();
        r.model = p.at("model").get<std::string>() == "fixed" ? PoolModel::fixed
                                                              : PoolModel::random;
        return r;
    };
    if (j.contains("fixed")) doc.fixed = read_pooled(j["fixed"]);
    if (j.contains("random")) doc.random = read_pooled(j["random"]);
    return doc;
}

inline ReportDoc load_report(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_report: cannot open " + path);
    nlohmann::json j;
    in >> j;
    return report_doc_from_json(j);
}

}  // namespace pfmeta
