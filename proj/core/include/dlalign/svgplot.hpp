#pragma once

#include <string>
#include <vector>

namespace dlalign {

// Minimal static vector-graphics plots: enough for the report figures,
// nothing interactive.

struct PlotSeries {
  std::string label;
  std::vector<double> x, y;
};

struct LinePlotOptions {
  std::string title, x_label, y_label;
  // horizontal reference lines (label, y value), dashed
  std::vector<std::pair<std::string, double>> hlines;
};

void write_line_plot(const std::string& path,
                     const std::vector<PlotSeries>& series,
                     const LinePlotOptions& options);

void write_bar_plot(const std::string& path,
                    const std::vector<std::string>& labels,
                    const std::vector<double>& values,
                    const std::string& title, const std::string& y_label);

}  // namespace dlalign
