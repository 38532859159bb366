#pragma once

// Standalone-SVG forest plot: one row per study in dataset order (square
// marker sized by inverse variance, horizontal 95% interval), a dashed
// vertical null line at 0 and a summary diamond spanning the pooled 95% CI.
// All coordinates are printed with fixed precision so identical inputs
// produce identical bytes.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "pfmeta/report.hpp"

namespace pfmeta {

namespace detail {

inline std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

}  // namespace detail

inline std::string forest_svg(const ReportDoc& doc) {
    if (!doc.fixed && !doc.random)
        throw std::domain_error("forest_svg: report has no pooled analysis");
    const PooledResult& pooled = doc.fixed ? *doc.fixed : *doc.random;
    const auto& studies = doc.dataset;

    // data range including every interval and the null line
    double x_min = 0.0, x_max = 0.0;
    for (const auto& e : studies) {
        const Interval ci = variance_to_ci(e.pf, e.variance);
        x_min = std::min(x_min, ci.lower);
        x_max = std::max(x_max, ci.upper);
    }
    x_min = std::min(x_min, pooled.ci.lower);
    x_max = std::max(x_max, pooled.ci.upper);
    const double pad = 0.05 * (x_max - x_min);
    x_min -= pad;
    x_max += pad;

    const double width = 720.0, label_w = 120.0, margin = 20.0;
    const double row_h = 28.0;
    const double plot_w = width - label_w - 2.0 * margin;
    const double height = margin * 2.0 + row_h * (static_cast<double>(studies.size()) + 2.0);
    auto x_of = [&](double v) {
        return label_w + margin + (v - x_min) / (x_max - x_min) * plot_w;
    };

    double w_max = 0.0;
    for (const auto& e : studies) w_max = std::max(w_max, 1.0 / e.variance);

    std::ostringstream os;
    using detail::fmt;
    os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(width)
       << "\" height=\"" << fmt(height) << "\" viewBox=\"0 0 " << fmt(width) << " "
       << fmt(height) << "\">\n";
    os << "<rect width=\"" << fmt(width) << "\" height=\"" << fmt(height)
       << "\" fill=\"white\"/>\n";

    const double y_top = margin;
    const double y_bottom = margin + row_h * (static_cast<double>(studies.size()) + 1.5);
    os << "<line x1=\"" << fmt(x_of(0.0)) << "\" y1=\"" << fmt(y_top) << "\" x2=\""
       << fmt(x_of(0.0)) << "\" y2=\"" << fmt(y_bottom)
       << "\" stroke=\"red\" stroke-dasharray=\"6,4\" stroke-width=\"1.5\"/>\n";

    for (std::size_t i = 0; i < studies.size(); ++i) {
        const auto& e = studies[i];
        const Interval ci = variance_to_ci(e.pf, e.variance);
        const double y = margin + row_h * (static_cast<double>(i) + 0.5);
        os << "<text x=\"" << fmt(margin) << "\" y=\"" << fmt(y + 4.0)
           << "\" font-family=\"sans-serif\" font-size=\"13\">" << e.label
           << "</text>\n";
        os << "<line x1=\"" << fmt(x_of(ci.lower)) << "\" y1=\"" << fmt(y)
           << "\" x2=\"" << fmt(x_of(ci.upper)) << "\" y2=\"" << fmt(y)
           << "\" stroke=\"black\" stroke-width=\"1.5\"/>\n";
        // marker area proportional to inverse variance
        const double half = 3.0 + 5.0 * std::sqrt((1.0 / e.variance) / w_max);
        os << "<rect x=\"" << fmt(x_of(e.pf) - half) << "\" y=\"" << fmt(y - half)
           << "\" width=\"" << fmt(2.0 * half) << "\" height=\"" << fmt(2.0 * half)
           << "\" fill=\"red\"/>\n";
    }

    const double y_sum = margin + row_h * (static_cast<double>(studies.size()) + 0.75);
    const double dh = 9.0;
    os << "<text x=\"" << fmt(margin) << "\" y=\"" << fmt(y_sum + 4.0)
       << "\" font-family=\"sans-serif\" font-size=\"13\">Summary</text>\n";
    os << "<polygon points=\"" << fmt(x_of(pooled.ci.lower)) << "," << fmt(y_sum)
       << " " << fmt(x_of(pooled.spf)) << "," << fmt(y_sum - dh) << " "
       << fmt(x_of(pooled.ci.upper)) << "," << fmt(y_sum) << " "
       << fmt(x_of(pooled.spf)) << "," << fmt(y_sum + dh)
       << "\" fill=\"white\" stroke=\"red\" stroke-width=\"1.5\"/>\n";

    // x-axis with ticks at multiples of 0.2
    const double y_axis = y_bottom + 6.0;
    os << "<line x1=\"" << fmt(x_of(x_min)) << "\" y1=\"" << fmt(y_axis) << "\" x2=\""
       << fmt(x_of(x_max)) << "\" y2=\"" << fmt(y_axis)
       << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
    const double tick0 = std::ceil(x_min / 0.2) * 0.2;
    for (double t = tick0; t <= x_max + 1e-9; t += 0.2) {
        os << "<line x1=\"" << fmt(x_of(t)) << "\" y1=\"" << fmt(y_axis) << "\" x2=\""
           << fmt(x_of(t)) << "\" y2=\"" << fmt(y_axis + 5.0)
           << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
        os << "<text x=\"" << fmt(x_of(t)) << "\" y=\"" << fmt(y_axis + 18.0)
           << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
           << fmt(t) << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

inline void emit_forest_svg(const ReportDoc& doc, const std::string& path) {
    const std::string svg = forest_svg(doc);
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("emit_forest_svg: cannot open " + path);
    os << svg;
    if (!os) throw std::runtime_error("emit_forest_svg: write failed for " + path);
}

}  // namespace pfmeta
