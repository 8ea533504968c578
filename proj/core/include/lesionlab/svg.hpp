#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace lesionlab {

struct HeatmapSpec {
  std::string title;
  std::vector<std::string> rows;
  std::vector<std::string> cols;
  /// values[r][c]; empty cells are drawn hatched grey.
  std::vector<std::vector<std::optional<double>>> values;
  double vmin = 0.0;
  double vmax = 1.0;
  std::string legend;
  /// Draw the numeric value inside each cell.
  bool annotate = true;
};

/// Cell grid with a viridis-like colour ramp and a legend bar.
std::string heatmap_svg(const HeatmapSpec& spec);

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
  bool dashed = false;
};

struct LineChartSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
  std::optional<std::pair<double, double>> y_range;
  /// Optional horizontal reference line (e.g. a diagnostic threshold).
  std::optional<double> reference_y;
  std::string reference_label;
};

std::string line_chart_svg(const LineChartSpec& spec);

/// Escapes &, <, >, " and ' for SVG text and attributes.
std::string xml_escape(std::string_view text);

}  // namespace lesionlab
