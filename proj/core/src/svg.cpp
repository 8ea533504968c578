#include "lesionlab/svg.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <sstream>

#include "lesionlab/errors.hpp"

namespace lesionlab {

std::string xml_escape(std::string_view text) {
  std::string out;
  for (char c : text) {
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

namespace {

// Fixed-precision text independent of the global locale.
std::string fixed(double v, int digits = 2) {
  if (v == 0.0) v = 0.0;  // no "-0.00"
  std::array<char, 64> buf{};
  auto [p, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::fixed, digits);
  return std::string(buf.data(), p);
}

struct Rgb {
  double r, g, b;
};

// Anchors sampled from the viridis colour map.
constexpr std::array<Rgb, 5> kRamp{{{68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {94, 201, 98}, {253, 231, 37}}};

std::string ramp(double t) {
  t = std::clamp(std::isfinite(t) ? t : 0.0, 0.0, 1.0);
  const double pos = t * (kRamp.size() - 1);
  const auto i = std::min(static_cast<std::size_t>(pos), kRamp.size() - 2);
  const double f = pos - static_cast<double>(i);
  auto mix = [&](double a, double b) { return static_cast<int>(std::lround(a + (b - a) * f)); };
  std::array<char, 8> hex{};
  const int r = mix(kRamp[i].r, kRamp[i + 1].r), g = mix(kRamp[i].g, kRamp[i + 1].g),
            b = mix(kRamp[i].b, kRamp[i + 1].b);
  static constexpr char digits[] = "0123456789abcdef";
  hex[0] = '#';
  const std::array<int, 3> rgb{r, g, b};
  for (std::size_t k = 0; k < rgb.size(); ++k) {
    hex[1 + 2 * k] = digits[rgb[k] / 16];
    hex[2 + 2 * k] = digits[rgb[k] % 16];
  }
  return std::string(hex.data(), 7);
}

constexpr std::array<const char*, 8> kPalette{"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                              "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f"};

void header(std::ostringstream& out, int width, int height) {
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << ' ' << height << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

std::pair<double, double> nice_range(double lo, double hi) {
  if (lo == hi) {
    lo -= 1.0;
    hi += 1.0;
  }
  const double pad = (hi - lo) * 0.05;
  return {lo - pad, hi + pad};
}

}  // namespace

std::string heatmap_svg(const HeatmapSpec& spec) {
  if (spec.values.size() != spec.rows.size()) throw InputError("heatmap row labels do not match the values");
  for (const auto& row : spec.values)
    if (row.size() != spec.cols.size()) throw InputError("heatmap column labels do not match the values");
  if (!(spec.vmax > spec.vmin)) throw InputError("heatmap needs vmax > vmin");

  constexpr int cell = 36, left = 90, top = 40, label_band = 110, legend_w = 70;
  const int grid_w = cell * static_cast<int>(spec.cols.size());
  const int grid_h = cell * static_cast<int>(spec.rows.size());
  const int width = left + grid_w + legend_w + 20;
  const int height = std::max(top + grid_h + label_band, top + 220);

  std::ostringstream out;
  header(out, width, height);
  out << "<defs><pattern id=\"na\" width=\"6\" height=\"6\" patternUnits=\"userSpaceOnUse\">"
         "<rect width=\"6\" height=\"6\" fill=\"#dddddd\"/><path d=\"M0,6 L6,0\" stroke=\"#999999\"/></pattern></defs>\n";
  out << "<text x=\"" << width / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << xml_escape(spec.title)
      << "</text>\n";
  for (std::size_t r = 0; r < spec.rows.size(); ++r) {
    const int y = top + cell * static_cast<int>(r);
    out << "<text x=\"" << left - 6 << "\" y=\"" << y + cell / 2 + 4 << "\" text-anchor=\"end\">"
        << xml_escape(spec.rows[r]) << "</text>\n";
    for (std::size_t c = 0; c < spec.cols.size(); ++c) {
      const int x = left + cell * static_cast<int>(c);
      const auto& v = spec.values[r][c];
      const std::string fill = v ? ramp((*v - spec.vmin) / (spec.vmax - spec.vmin)) : "url(#na)";
      out << "<rect class=\"cell\" x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell << "\" height=\"" << cell << "\" fill=\""
          << fill << "\" stroke=\"white\"/>";
      if (v && spec.annotate) {
        const bool dark = (*v - spec.vmin) / (spec.vmax - spec.vmin) < 0.6;
        out << "<text x=\"" << x + cell / 2 << "\" y=\"" << y + cell / 2 + 4
            << "\" text-anchor=\"middle\" font-size=\"9\" fill=\"" << (dark ? "white" : "black") << "\">"
            << fixed(*v) << "</text>";
      }
      out << '\n';
    }
  }
  for (std::size_t c = 0; c < spec.cols.size(); ++c) {
    const int x = left + cell * static_cast<int>(c) + cell / 2;
    const int y = top + grid_h + 8;
    out << "<text x=\"" << x << "\" y=\"" << y << "\" transform=\"rotate(60 " << x << ' ' << y
        << ")\">" << xml_escape(spec.cols[c]) << "</text>\n";
  }
  // Legend: vmin at the top, vmax at the bottom, matching "lower is darker".
  const int lx = left + grid_w + 20, lh = 160, steps = 32;
  for (int i = 0; i < steps; ++i) {
    const double t = (i + 0.5) / steps;
    out << "<rect x=\"" << lx << "\" y=\"" << top + i * lh / steps << "\" width=\"14\" height=\"" << lh / steps + 1
        << "\" fill=\"" << ramp(t) << "\"/>\n";
  }
  out << "<text x=\"" << lx + 18 << "\" y=\"" << top + 8 << "\">" << fixed(spec.vmin) << "</text>\n";
  out << "<text x=\"" << lx + 18 << "\" y=\"" << top + lh << "\">" << fixed(spec.vmax) << "</text>\n";
  if (!spec.legend.empty())
    out << "<text x=\"" << lx << "\" y=\"" << top + lh + 18 << "\" font-size=\"10\">" << xml_escape(spec.legend)
        << "</text>\n";
  out << "</svg>\n";
  return out.str();
}

std::string line_chart_svg(const LineChartSpec& spec) {
  if (spec.series.empty()) throw InputError("line chart needs at least one series");
  double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
  for (const auto& s : spec.series) {
    if (s.x.size() != s.y.size() || s.x.empty()) throw InputError("series '" + s.name + "' has mismatched points");
    for (double v : s.x) xmin = std::min(xmin, v), xmax = std::max(xmax, v);
    for (double v : s.y) ymin = std::min(ymin, v), ymax = std::max(ymax, v);
  }
  if (spec.reference_y) ymin = std::min(ymin, *spec.reference_y), ymax = std::max(ymax, *spec.reference_y);
  auto [y0, y1] = spec.y_range ? *spec.y_range : nice_range(ymin, ymax);
  if (xmin == xmax) xmax = xmin + 1.0;

  constexpr int width = 640, height = 400, left = 64, right = 170, top = 40, bottom = 56;
  const double pw = width - left - right, ph = height - top - bottom;
  auto sx = [&](double x) { return left + (x - xmin) / (xmax - xmin) * pw; };
  auto sy = [&](double y) { return top + (1.0 - (y - y0) / (y1 - y0)) * ph; };

  std::ostringstream out;
  header(out, width, height);
  out << "<text x=\"" << width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << xml_escape(spec.title)
      << "</text>\n";
  out << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  constexpr int ticks = 5;
  for (int i = 0; i <= ticks; ++i) {
    const double yv = y0 + (y1 - y0) * i / ticks;
    out << "<line x1=\"" << left << "\" x2=\"" << left + pw << "\" y1=\"" << fixed(sy(yv)) << "\" y2=\""
        << fixed(sy(yv)) << "\" stroke=\"#eeeeee\"/>";
    out << "<text x=\"" << left - 6 << "\" y=\"" << fixed(sy(yv) + 4) << "\" text-anchor=\"end\">" << fixed(yv, 1)
        << "</text>\n";
  }
  // x ticks at the distinct data positions
  std::vector<double> xs;
  for (const auto& s : spec.series) xs.insert(xs.end(), s.x.begin(), s.x.end());
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  for (double xv : xs) {
    const int digits = xv == std::floor(xv) ? 0 : 1;
    out << "<text x=\"" << fixed(sx(xv)) << "\" y=\"" << top + ph + 16 << "\" text-anchor=\"middle\">"
        << fixed(xv, digits) << "</text>\n";
  }
  out << "<text x=\"" << left + pw / 2 << "\" y=\"" << height - 14 << "\" text-anchor=\"middle\">"
      << xml_escape(spec.x_label) << "</text>\n";
  out << "<text x=\"16\" y=\"" << top + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
      << top + ph / 2 << ")\">" << xml_escape(spec.y_label) << "</text>\n";
  if (spec.reference_y) {
    const std::string y = fixed(sy(*spec.reference_y));
    out << "<line x1=\"" << left << "\" x2=\"" << left + pw << "\" y1=\"" << y << "\" y2=\"" << y
        << "\" stroke=\"#555555\" stroke-dasharray=\"2,3\"/>";
    out << "<text x=\"" << left + pw - 4 << "\" y=\"" << fixed(sy(*spec.reference_y) - 4)
        << "\" text-anchor=\"end\" fill=\"#555555\">" << xml_escape(spec.reference_label) << "</text>\n";
  }
  for (std::size_t i = 0; i < spec.series.size(); ++i) {
    const auto& s = spec.series[i];
    const char* colour = kPalette[i % kPalette.size()];
    out << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"2\""
        << (s.dashed ? " stroke-dasharray=\"6,4\"" : "") << " points=\"";
    for (std::size_t k = 0; k < s.x.size(); ++k) out << (k ? " " : "") << fixed(sx(s.x[k])) << ',' << fixed(sy(s.y[k]));
    out << "\"/>\n";
    for (std::size_t k = 0; k < s.x.size(); ++k)
      out << "<circle cx=\"" << fixed(sx(s.x[k])) << "\" cy=\"" << fixed(sy(s.y[k])) << "\" r=\"3\" fill=\"" << colour
          << "\"/>";
    out << '\n';
    const int ly = top + 14 + 18 * static_cast<int>(i);
    out << "<line x1=\"" << left + pw + 12 << "\" x2=\"" << left + pw + 36 << "\" y1=\"" << ly << "\" y2=\"" << ly
        << "\" stroke=\"" << colour << "\" stroke-width=\"2\"" << (s.dashed ? " stroke-dasharray=\"6,4\"" : "")
        << "/><text x=\"" << left + pw + 42 << "\" y=\"" << ly + 4 << "\">" << xml_escape(s.name) << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace lesionlab
