#pragma once

#include <string>
#include <vector>

namespace hedgebench {

// One named line-plot series. Points with NaN y break the polyline into
// segments (used for infeasible gaps in Q slices). When band_lo/band_hi are
// nonempty (same length as x) a translucent band is filled behind the line.
struct SvgSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> band_lo;
  std::vector<double> band_hi;
};

// Self-contained SVG documents, no external renderer. Output is fully
// deterministic: fixed canvas, fixed 6-significant-digit coordinates.

std::string svg_histogram(const std::vector<double>& counts,
                          const std::vector<std::string>& labels, const std::string& title,
                          const std::string& x_label, const std::string& y_label);

std::string svg_line_plot(const std::vector<SvgSeries>& series, const std::string& title,
                          const std::string& x_label, const std::string& y_label,
                          bool log_x = false);

// values[row][col]; NaN cells render as blanks
std::string svg_heatmap(const std::vector<std::vector<double>>& values,
                        const std::vector<std::string>& x_labels,
                        const std::vector<std::string>& y_labels, const std::string& title,
                        const std::string& x_label = "", const std::string& y_label = "");

}  // namespace hedgebench
