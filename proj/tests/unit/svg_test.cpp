#include <gtest/gtest.h>

#include "lesionlab/svg.hpp"

namespace lesionlab {
namespace {

std::size_t count(const std::string& s, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = s.find(needle); pos != std::string::npos; pos = s.find(needle, pos + 1)) ++n;
  return n;
}

TEST(Svg, EscapesMarkup) { EXPECT_EQ(xml_escape("a<b & \"c\" 'd'>"), "a&lt;b &amp; &quot;c&quot; &apos;d&apos;&gt;"); }

TEST(Svg, HeatmapHasOneCellPerValueAndHatchesGaps) {
  HeatmapSpec spec;
  spec.title = "L<0> units";
  spec.rows = {"L0.E1", "L2.E3"};
  spec.cols = {"agreement", "binding", "overall"};
  spec.values = {{0.1, 0.5, std::nullopt}, {1.0, 0.25, 0.75}};
  const std::string svg = heatmap_svg(spec);
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
  EXPECT_EQ(count(svg, "class=\"cell\""), 6u);
  EXPECT_NE(svg.find("url(#na)"), std::string::npos);
  EXPECT_NE(svg.find("L&lt;0&gt; units"), std::string::npos);
  EXPECT_EQ(heatmap_svg(spec), svg);
}

TEST(Svg, LineChartDrawsEverySeriesAndTheReference) {
  LineChartSpec spec;
  spec.title = "AQ";
  spec.series = {{"broca / zeroing", {0, 1, 2}, {95, 90, 80}, false}, {"random / xavier", {0, 1, 2}, {95, 94, 93}, true}};
  spec.reference_y = 93.8;
  spec.reference_label = "threshold";
  const std::string svg = line_chart_svg(spec);
  EXPECT_EQ(count(svg, "<polyline"), 2u);
  EXPECT_EQ(count(svg, "stroke-dasharray=\"6,4\""), 2u);  // dashed polyline and its legend swatch
  EXPECT_EQ(count(svg, "stroke-dasharray=\"2,3\""), 1u);  // reference line
  EXPECT_NE(svg.find("threshold"), std::string::npos);
}

}  // namespace
}  // namespace lesionlab
