#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "histocell/csv.hpp"
#include "histocell/errors.hpp"
#include "histocell/spatial.hpp"

namespace histocell {
namespace {

constexpr int kCell = 28;
constexpr int kLabelMargin = 170;
constexpr int kLegendWidth = 18;
constexpr int kLegendGap = 30;

std::string escape_xml(std::string_view text) {
  std::string out;
  for (const char ch : text) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out.push_back(ch);
    }
  }
  return out;
}

std::string hex(const std::array<std::uint8_t, 3>& rgb) {
  char buf[8];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", rgb[0], rgb[1], rgb[2]);
  return buf;
}

std::string fixed3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

}  // namespace

std::string heatmap_color(double value) {
  if (std::isnan(value)) return hex(HeatmapColors::undefined);
  const double v = std::clamp(value, -1.0, 1.0);
  const auto& end = v < 0.0 ? HeatmapColors::negative : HeatmapColors::positive;
  const double t = std::abs(v);
  std::array<std::uint8_t, 3> rgb{};
  for (std::size_t k = 0; k < 3; ++k) {
    const double mid = HeatmapColors::midpoint[k];
    rgb[k] = static_cast<std::uint8_t>(std::lround(mid + t * (static_cast<double>(end[k]) - mid)));
  }
  return hex(rgb);
}

std::string render_heatmap(const ColocMatrix& m, const std::vector<std::size_t>& order) {
  const std::size_t c = m.size();
  if (order.size() != c || std::set<std::size_t>(order.begin(), order.end()).size() != c ||
      std::any_of(order.begin(), order.end(), [c](std::size_t k) { return k >= c; }))
    throw Error("render_heatmap: order is not a permutation of the cell types");

  const int grid = static_cast<int>(c) * kCell;
  const int legend_x = kLabelMargin + grid + kLegendGap;
  const int width = legend_x + kLegendWidth + 50;
  const int height = kLabelMargin + grid + 20;

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << ' ' << height << "\" font-family=\"sans-serif\" font-size=\"11\">\n"
      << "<title>" << escape_xml(m.label.empty() ? "colocalization" : m.label) << "</title>\n"
      << "<defs>\n<linearGradient id=\"scale\" x1=\"0\" y1=\"1\" x2=\"0\" y2=\"0\">\n"
      << "<stop offset=\"0\" stop-color=\"" << heatmap_color(-1.0) << "\"/>\n"
      << "<stop offset=\"0.5\" stop-color=\"" << heatmap_color(0.0) << "\"/>\n"
      << "<stop offset=\"1\" stop-color=\"" << heatmap_color(1.0) << "\"/>\n"
      << "</linearGradient>\n</defs>\n";

  svg << "<g class=\"cells\">\n";
  for (std::size_t i = 0; i < c; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      const auto a = order[i];
      const auto b = order[j];
      const double v = m.r(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
      svg << "<rect class=\"cell\" x=\"" << kLabelMargin + static_cast<int>(j) * kCell << "\" y=\""
          << kLabelMargin + static_cast<int>(i) * kCell << "\" width=\"" << kCell << "\" height=\"" << kCell
          << "\" fill=\"" << heatmap_color(v) << "\"><title>" << escape_xml(m.cell_types[a]) << " / "
          << escape_xml(m.cell_types[b]) << ": " << (std::isnan(v) ? "NA" : fixed3(v)) << "</title></rect>\n";
    }
  }
  svg << "</g>\n<g class=\"labels\">\n";
  for (std::size_t i = 0; i < c; ++i) {
    const auto& name = escape_xml(m.cell_types[order[i]]);
    const int mid = kLabelMargin + static_cast<int>(i) * kCell + kCell / 2;
    svg << "<text x=\"" << kLabelMargin - 6 << "\" y=\"" << mid + 4 << "\" text-anchor=\"end\">" << name << "</text>\n";
    svg << "<text transform=\"translate(" << mid + 4 << ',' << kLabelMargin - 6
        << ") rotate(-90)\" text-anchor=\"start\">" << name << "</text>\n";
  }
  svg << "</g>\n";

  // Legend bar drawn as a polygon so that every <rect> is a matrix cell.
  const int top = kLabelMargin;
  const int bottom = kLabelMargin + grid;
  svg << "<g class=\"legend\">\n"
      << "<polygon points=\"" << legend_x << ',' << top << ' ' << legend_x + kLegendWidth << ',' << top << ' '
      << legend_x + kLegendWidth << ',' << bottom << ' ' << legend_x << ',' << bottom
      << "\" fill=\"url(#scale)\" stroke=\"#444444\" stroke-width=\"0.5\"/>\n";
  const std::array<std::pair<double, int>, 3> ticks{{{1.0, top}, {0.0, (top + bottom) / 2}, {-1.0, bottom}}};
  for (const auto& [value, y] : ticks)
    svg << "<text x=\"" << legend_x + kLegendWidth + 4 << "\" y=\"" << y + 4 << "\">" << (value > 0 ? "+1" : value < 0 ? "-1" : "0")
        << "</text>\n";
  svg << "</g>\n</svg>\n";
  return svg.str();
}

}  // namespace histocell
