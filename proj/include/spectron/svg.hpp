#ifndef SPECTRON_SVG_HPP
#define SPECTRON_SVG_HPP

#include <string>
#include <utility>
#include <vector>

namespace spectron {

/// One plotted series: a polyline, scatter markers, or both.
struct SvgSeries {
    std::string label;
    std::vector<std::pair<double, double>> points; ///< (x, y) in data units
    std::string color = "#00589c";
    bool line = true;
    bool markers = false;
};

/// One set of axes. Log axes map the data through log10; points that are
/// non-finite (or non-positive on a log axis) are skipped, breaking the
/// polyline at that sample.
struct SvgPanel {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<SvgSeries> series;
    bool log_x = false;
    bool log_y = false;
};

/// Renders panels stacked vertically into one standalone SVG document.
/// Output is a pure function of the inputs: fixed layout, fixed-precision
/// coordinates, no timestamps. The axis range of every panel covers every
/// plotted point, padded by 4%; labels are XML-escaped. Throws
/// std::invalid_argument when there are no panels.
std::string render_svg(const std::vector<SvgPanel>& panels);

/// Writes `content` to `path`, replacing the file. Throws
/// std::runtime_error on I/O failure.
void write_text_file(const std::string& path, const std::string& content);

} // namespace spectron

#endif // SPECTRON_SVG_HPP
