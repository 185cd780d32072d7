#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "fedclip/csv.hpp"
#include "fedclip/errors.hpp"

namespace fedclip {

struct ChartSeries {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

namespace detail {

inline const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                 "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

inline std::string fmt2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

inline std::string fmt_tick(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

inline void expand_range(double& lo, double& hi) {
    if (!(hi > lo)) {
        const double pad = std::max(1.0, std::abs(lo) * 0.1);
        lo -= pad;
        hi += pad;
    } else {
        const double pad = 0.05 * (hi - lo);
        lo -= pad;
        hi += pad;
    }
}

} // namespace detail

/// Fixed-size (720x480) deterministic line chart: no timestamps, fixed number
/// formatting, colors assigned by series order. Regenerating from the same
/// data yields byte-identical output.
inline std::string render_line_chart(const std::string& title,
                                     const std::string& x_label,
                                     const std::string& y_label,
                                     const std::vector<ChartSeries>& series) {
    if (series.empty()) throw ConfigError("render_line_chart: no series");
    double xmin = 0, xmax = 0, ymin = 0, ymax = 0;
    bool first = true;
    std::size_t total_points = 0;
    for (const auto& s : series) {
        if (s.x.size() != s.y.size()) throw ConfigError("render_line_chart: x/y size mismatch");
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            if (first) {
                xmin = xmax = s.x[i];
                ymin = ymax = s.y[i];
                first = false;
            } else {
                xmin = std::min(xmin, s.x[i]);
                xmax = std::max(xmax, s.x[i]);
                ymin = std::min(ymin, s.y[i]);
                ymax = std::max(ymax, s.y[i]);
            }
            ++total_points;
        }
    }
    if (total_points == 0) throw ConfigError("render_line_chart: no finite points");
    detail::expand_range(xmin, xmax);
    detail::expand_range(ymin, ymax);

    const double L = 70, R = 640, T = 40, B = 430; // plot area inside the 720x480 canvas
    auto sx = [&](double x) { return L + (x - xmin) / (xmax - xmin) * (R - L); };
    auto sy = [&](double y) { return B - (y - ymin) / (ymax - ymin) * (B - T); };

    std::string svg;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"720\" height=\"480\" "
           "viewBox=\"0 0 720 480\">\n";
    svg += "<rect x=\"0\" y=\"0\" width=\"720\" height=\"480\" fill=\"#ffffff\"/>\n";
    svg += "<text x=\"360\" y=\"24\" text-anchor=\"middle\" font-family=\"monospace\" "
           "font-size=\"16\">" + title + "</text>\n";

    // axes and ticks
    svg += "<line x1=\"" + detail::fmt2(L) + "\" y1=\"" + detail::fmt2(B) + "\" x2=\"" +
           detail::fmt2(R) + "\" y2=\"" + detail::fmt2(B) + "\" stroke=\"#000000\"/>\n";
    svg += "<line x1=\"" + detail::fmt2(L) + "\" y1=\"" + detail::fmt2(T) + "\" x2=\"" +
           detail::fmt2(L) + "\" y2=\"" + detail::fmt2(B) + "\" stroke=\"#000000\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double fx = xmin + (xmax - xmin) * k / 4.0;
        const double fy = ymin + (ymax - ymin) * k / 4.0;
        const double px = sx(fx), py = sy(fy);
        svg += "<line x1=\"" + detail::fmt2(px) + "\" y1=\"" + detail::fmt2(B) + "\" x2=\"" +
               detail::fmt2(px) + "\" y2=\"" + detail::fmt2(B + 5) + "\" stroke=\"#000000\"/>\n";
        svg += "<text x=\"" + detail::fmt2(px) + "\" y=\"" + detail::fmt2(B + 18) +
               "\" text-anchor=\"middle\" font-family=\"monospace\" font-size=\"11\">" +
               detail::fmt_tick(fx) + "</text>\n";
        svg += "<line x1=\"" + detail::fmt2(L - 5) + "\" y1=\"" + detail::fmt2(py) + "\" x2=\"" +
               detail::fmt2(L) + "\" y2=\"" + detail::fmt2(py) + "\" stroke=\"#000000\"/>\n";
        svg += "<text x=\"" + detail::fmt2(L - 8) + "\" y=\"" + detail::fmt2(py + 4) +
               "\" text-anchor=\"end\" font-family=\"monospace\" font-size=\"11\">" +
               detail::fmt_tick(fy) + "</text>\n";
    }
    svg += "<text x=\"360\" y=\"462\" text-anchor=\"middle\" font-family=\"monospace\" "
           "font-size=\"13\">" + x_label + "</text>\n";
    svg += "<text x=\"16\" y=\"235\" text-anchor=\"middle\" font-family=\"monospace\" "
           "font-size=\"13\" transform=\"rotate(-90 16 235)\">" + y_label + "</text>\n";

    // series
    for (std::size_t s = 0; s < series.size(); ++s) {
        const char* color = detail::kPalette[s % 8];
        std::string points;
        for (std::size_t i = 0; i < series[s].x.size(); ++i) {
            if (!std::isfinite(series[s].x[i]) || !std::isfinite(series[s].y[i])) continue;
            points += detail::fmt2(sx(series[s].x[i])) + "," + detail::fmt2(sy(series[s].y[i])) + " ";
        }
        if (!points.empty()) points.pop_back();
        svg += "<polyline fill=\"none\" stroke=\"" + std::string(color) +
               "\" stroke-width=\"1.5\" points=\"" + points + "\"/>\n";
        if (series[s].x.size() <= 64) {
            for (std::size_t i = 0; i < series[s].x.size(); ++i) {
                if (!std::isfinite(series[s].x[i]) || !std::isfinite(series[s].y[i])) continue;
                svg += "<circle cx=\"" + detail::fmt2(sx(series[s].x[i])) + "\" cy=\"" +
                       detail::fmt2(sy(series[s].y[i])) + "\" r=\"2.5\" fill=\"" + color + "\"/>\n";
            }
        }
        // legend entry
        const double ly = T + 14 + 16 * static_cast<double>(s);
        svg += "<line x1=\"" + detail::fmt2(R - 150) + "\" y1=\"" + detail::fmt2(ly - 4) +
               "\" x2=\"" + detail::fmt2(R - 126) + "\" y2=\"" + detail::fmt2(ly - 4) +
               "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
        svg += "<text x=\"" + detail::fmt2(R - 120) + "\" y=\"" + detail::fmt2(ly) +
               "\" font-family=\"monospace\" font-size=\"12\">" + series[s].label + "</text>\n";
    }
    svg += "</svg>\n";
    return svg;
}

struct PlotPaths {
    std::filesystem::path loss_svg;
    std::filesystem::path grad_norm_svg;
};

/// Renders loss and gradient-norm charts from a trajectory (or compare-merged)
/// CSV. Deterministic: same CSV bytes give the same SVG bytes. Nothing is
/// written if the CSV fails validation.
inline PlotPaths emit_plots(const std::filesystem::path& csv_path,
                            const std::filesystem::path& out_dir) {
    const PlotData data = parse_plot_csv(read_text_file(csv_path.string()), csv_path.string());

    std::vector<ChartSeries> loss_series, grad_series;
    for (const auto& [label, series] : data) {
        loss_series.push_back(ChartSeries{label, series.rounds, series.loss});
        grad_series.push_back(ChartSeries{label, series.rounds, series.grad_norm});
    }
    const std::string loss_svg = render_line_chart("loss vs round", "round", "loss", loss_series);
    const std::string grad_svg =
        render_line_chart("gradient norm vs round", "round", "grad_norm", grad_series);

    std::filesystem::create_directories(out_dir);
    const std::string stem = csv_path.stem().string();
    PlotPaths paths{out_dir / (stem + "_loss.svg"), out_dir / (stem + "_grad_norm.svg")};
    write_text_file(paths.loss_svg.string(), loss_svg);
    write_text_file(paths.grad_norm_svg.string(), grad_svg);
    return paths;
}

} // namespace fedclip
