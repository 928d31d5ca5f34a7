#include "spectron/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace spectron {

namespace {

// Fixed layout, in user units.
constexpr double kPanelWidth = 640.0;
constexpr double kPanelHeight = 300.0;
constexpr double kMarginLeft = 78.0;
constexpr double kMarginRight = 24.0;
constexpr double kMarginTop = 42.0;
constexpr double kMarginBottom = 52.0;
constexpr int kTicks = 5;

const char* kFallbackColors[] = {"#00589c", "#c24a1e", "#2c7a3f", "#7a2c8f", "#6b6b6b"};

std::string escape_xml(const std::string& text) {
    std::string out;
    out.reserve(text.size());
    for (const char c : text) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        case '\'': out += "&apos;"; break;
        default: out += c;
        }
    }
    return out;
}

std::string fmt(double v, const char* spec = "%.2f") {
    char buf[64];
    std::snprintf(buf, sizeof(buf), spec, v);
    return buf;
}

struct Axis {
    double lo = 0.0;
    double hi = 1.0;
    bool log = false;

    /// Transformed coordinate of a data value; callers have already
    /// filtered out values invalid for the axis.
    double place(double v) const { return log ? std::log10(v) : v; }
    /// Inverse transform, for tick labels.
    double unplace(double t) const { return log ? std::pow(10.0, t) : t; }
};

bool usable(double v, bool log_axis) {
    return std::isfinite(v) && (!log_axis || v > 0.0);
}

/// Axis over the transformed values of every usable point, padded so no
/// sample sits on the frame.
Axis fit_axis(const SvgPanel& panel, bool vertical) {
    const bool log_axis = vertical ? panel.log_y : panel.log_x;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const SvgSeries& s : panel.series)
        for (const auto& [x, y] : s.points) {
            if (!usable(x, panel.log_x) || !usable(y, panel.log_y)) continue;
            const double raw = vertical ? y : x;
            const double t = log_axis ? std::log10(raw) : raw;
            lo = std::min(lo, t);
            hi = std::max(hi, t);
        }
    Axis axis;
    axis.log = log_axis;
    if (!(lo <= hi)) { // no usable points at all
        axis.lo = log_axis ? 0.0 : 0.0;
        axis.hi = log_axis ? 1.0 : 1.0;
        return axis;
    }
    double pad = 0.04 * (hi - lo);
    if (pad <= 0.0) pad = (std::fabs(lo) > 0.0 ? 0.05 * std::fabs(lo) : 0.5);
    axis.lo = lo - pad;
    axis.hi = hi + pad;
    return axis;
}

void render_panel(std::string& out, const SvgPanel& panel, double y_offset,
                  std::size_t panel_index) {
    const double plot_x = kMarginLeft;
    const double plot_y = y_offset + kMarginTop;
    const double plot_w = kPanelWidth - kMarginLeft - kMarginRight;
    const double plot_h = kPanelHeight - kMarginTop - kMarginBottom;

    const Axis ax = fit_axis(panel, /*vertical=*/false);
    const Axis ay = fit_axis(panel, /*vertical=*/true);
    const auto sx = [&](double t) { return plot_x + (t - ax.lo) / (ax.hi - ax.lo) * plot_w; };
    const auto sy = [&](double t) {
        return plot_y + plot_h - (t - ay.lo) / (ay.hi - ay.lo) * plot_h;
    };

    out += "  <g>\n";
    out += "    <rect x=\"" + fmt(plot_x) + "\" y=\"" + fmt(plot_y) + "\" width=\"" +
           fmt(plot_w) + "\" height=\"" + fmt(plot_h) +
           "\" fill=\"#ffffff\" stroke=\"#222222\" stroke-width=\"1\"/>\n";
    out += "    <text x=\"" + fmt(plot_x) + "\" y=\"" + fmt(plot_y - 14.0) +
           "\" font-family=\"monospace\" font-size=\"15\" fill=\"#111111\">" +
           escape_xml(panel.title) + "</text>\n";

    // Ticks and grid.
    for (int k = 0; k < kTicks; ++k) {
        const double f = static_cast<double>(k) / (kTicks - 1);
        const double tx = ax.lo + f * (ax.hi - ax.lo);
        const double ty = ay.lo + f * (ay.hi - ay.lo);
        const double px = sx(tx);
        const double py = sy(ty);
        out += "    <line x1=\"" + fmt(px) + "\" y1=\"" + fmt(plot_y + plot_h) + "\" x2=\"" +
               fmt(px) + "\" y2=\"" + fmt(plot_y + plot_h + 5.0) +
               "\" stroke=\"#222222\" stroke-width=\"1\"/>\n";
        out += "    <text x=\"" + fmt(px) + "\" y=\"" + fmt(plot_y + plot_h + 18.0) +
               "\" font-family=\"monospace\" font-size=\"11\" fill=\"#111111\" "
               "text-anchor=\"middle\">" +
               escape_xml(fmt(ax.unplace(tx), "%.4g")) + "</text>\n";
        out += "    <line x1=\"" + fmt(plot_x - 5.0) + "\" y1=\"" + fmt(py) + "\" x2=\"" +
               fmt(plot_x) + "\" y2=\"" + fmt(py) +
               "\" stroke=\"#222222\" stroke-width=\"1\"/>\n";
        out += "    <text x=\"" + fmt(plot_x - 8.0) + "\" y=\"" + fmt(py + 4.0) +
               "\" font-family=\"monospace\" font-size=\"11\" fill=\"#111111\" "
               "text-anchor=\"end\">" +
               escape_xml(fmt(ay.unplace(ty), "%.4g")) + "</text>\n";
    }
    out += "    <text x=\"" + fmt(plot_x + plot_w / 2.0) + "\" y=\"" +
           fmt(plot_y + plot_h + 38.0) +
           "\" font-family=\"monospace\" font-size=\"12\" fill=\"#111111\" "
           "text-anchor=\"middle\">" +
           escape_xml(panel.x_label) + "</text>\n";
    out += "    <text x=\"" + fmt(plot_x - 58.0) + "\" y=\"" + fmt(plot_y + plot_h / 2.0) +
           "\" font-family=\"monospace\" font-size=\"12\" fill=\"#111111\" "
           "text-anchor=\"middle\" transform=\"rotate(-90 " + fmt(plot_x - 58.0) + " " +
           fmt(plot_y + plot_h / 2.0) + ")\">" +
           escape_xml(panel.y_label) + "</text>\n";

    // Series.
    for (std::size_t si = 0; si < panel.series.size(); ++si) {
        const SvgSeries& s = panel.series[si];
        const std::string color =
            s.color.empty() ? kFallbackColors[si % 5] : s.color;
        if (s.line) {
            std::string run;
            const auto flush_run = [&]() {
                if (!run.empty()) {
                    out += "    <polyline points=\"" + run + "\" fill=\"none\" stroke=\"" +
                           color + "\" stroke-width=\"1.5\"/>\n";
                    run.clear();
                }
            };
            for (const auto& [x, y] : s.points) {
                if (!usable(x, panel.log_x) || !usable(y, panel.log_y)) {
                    flush_run();
                    continue;
                }
                if (!run.empty()) run += " ";
                run += fmt(sx(ax.place(x))) + "," + fmt(sy(ay.place(y)));
            }
            flush_run();
        }
        if (s.markers) {
            for (const auto& [x, y] : s.points) {
                if (!usable(x, panel.log_x) || !usable(y, panel.log_y)) continue;
                out += "    <circle cx=\"" + fmt(sx(ax.place(x))) + "\" cy=\"" +
                       fmt(sy(ay.place(y))) + "\" r=\"2.5\" fill=\"" + color + "\"/>\n";
            }
        }
        // Legend entry, right-aligned in the panel header.
        const double lx = plot_x + plot_w - 150.0;
        const double ly = plot_y + 16.0 + 16.0 * static_cast<double>(si);
        out += "    <line x1=\"" + fmt(lx) + "\" y1=\"" + fmt(ly - 4.0) + "\" x2=\"" +
               fmt(lx + 18.0) + "\" y2=\"" + fmt(ly - 4.0) + "\" stroke=\"" + color +
               "\" stroke-width=\"2\"/>\n";
        out += "    <text x=\"" + fmt(lx + 24.0) + "\" y=\"" + fmt(ly) +
               "\" font-family=\"monospace\" font-size=\"11\" fill=\"#111111\">" +
               escape_xml(s.label) + "</text>\n";
    }
    out += "  </g>\n";
    (void)panel_index;
}

} // namespace

std::string render_svg(const std::vector<SvgPanel>& panels) {
    if (panels.empty()) throw std::invalid_argument("render_svg: no panels");
    const double total_h = kPanelHeight * static_cast<double>(panels.size());
    std::string out;
    out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(kPanelWidth, "%.0f") +
           "\" height=\"" + fmt(total_h, "%.0f") + "\" viewBox=\"0 0 " +
           fmt(kPanelWidth, "%.0f") + " " + fmt(total_h, "%.0f") + "\">\n";
    out += "  <rect x=\"0\" y=\"0\" width=\"" + fmt(kPanelWidth, "%.0f") + "\" height=\"" +
           fmt(total_h, "%.0f") + "\" fill=\"#fbfbf8\"/>\n";
    for (std::size_t i = 0; i < panels.size(); ++i)
        render_panel(out, panels[i], kPanelHeight * static_cast<double>(i), i);
    out += "</svg>\n";
    return out;
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

} // namespace spectron
