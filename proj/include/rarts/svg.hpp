#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "rarts/csv.hpp"

namespace rarts {

struct PlotSpec {
  std::string x_column = "alpha";
  std::string y_column = "w";
  std::string title = "trajectory";
  // Reference markers drawn as crosses, e.g. the bilevel minimizer (1,1)
  // and the spurious point (2,2).
  std::vector<std::pair<double, double>> reference_points = {{1.0, 1.0}, {2.0, 2.0}};
};

namespace detail {
inline std::string svg_num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}
}  // namespace detail

// Standalone SVG phase plot: 800x600 viewBox, 40-unit margins, linear axes
// auto-scaled to the data extent, 5 ticks per axis, polyline with start and
// end markers. Output is deterministic for fixed input.
inline std::string render_svg(const CsvTable& table, const PlotSpec& spec) {
  auto col = [&](const std::string& name) -> std::size_t {
    for (std::size_t i = 0; i < table.header.size(); ++i)
      if (table.header[i] == name) return i;
    throw std::runtime_error("plot: no column '" + name + "' in CSV");
  };
  const std::size_t cx = col(spec.x_column), cy = col(spec.y_column);
  if (table.rows.empty()) throw std::runtime_error("plot: trajectory is empty");

  double xmin = table.rows[0][cx], xmax = xmin;
  double ymin = table.rows[0][cy], ymax = ymin;
  for (const auto& r : table.rows) {
    xmin = std::min(xmin, r[cx]);
    xmax = std::max(xmax, r[cx]);
    ymin = std::min(ymin, r[cy]);
    ymax = std::max(ymax, r[cy]);
  }
  for (auto [rx, ry] : spec.reference_points) {
    xmin = std::min(xmin, rx);
    xmax = std::max(xmax, rx);
    ymin = std::min(ymin, ry);
    ymax = std::max(ymax, ry);
  }
  if (xmax - xmin < 1e-12) { xmin -= 0.5; xmax += 0.5; }
  if (ymax - ymin < 1e-12) { ymin -= 0.5; ymax += 0.5; }

  const double W = 800, H = 600, M = 40;
  auto px = [&](double x) { return M + (x - xmin) / (xmax - xmin) * (W - 2 * M); };
  auto py = [&](double y) { return H - M - (y - ymin) / (ymax - ymin) * (H - 2 * M); };

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 800 600\">\n";
  s << "<rect x=\"0\" y=\"0\" width=\"800\" height=\"600\" fill=\"white\"/>\n";
  s << "<text x=\"400\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">"
    << spec.title << "</text>\n";
  // axes
  s << "<line x1=\"" << M << "\" y1=\"" << H - M << "\" x2=\"" << W - M
    << "\" y2=\"" << H - M << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << M << "\" y1=\"" << M << "\" x2=\"" << M << "\" y2=\""
    << H - M << "\" stroke=\"black\"/>\n";
  for (int i = 0; i < 5; ++i) {
    const double fx = xmin + (xmax - xmin) * i / 4.0;
    const double fy = ymin + (ymax - ymin) * i / 4.0;
    s << "<line x1=\"" << detail::svg_num(px(fx)) << "\" y1=\"" << H - M
      << "\" x2=\"" << detail::svg_num(px(fx)) << "\" y2=\"" << H - M + 5
      << "\" stroke=\"black\"/>\n";
    s << "<text x=\"" << detail::svg_num(px(fx)) << "\" y=\"" << H - M + 18
      << "\" text-anchor=\"middle\" font-size=\"10\">" << detail::svg_num(fx)
      << "</text>\n";
    s << "<line x1=\"" << M - 5 << "\" y1=\"" << detail::svg_num(py(fy))
      << "\" x2=\"" << M << "\" y2=\"" << detail::svg_num(py(fy))
      << "\" stroke=\"black\"/>\n";
    s << "<text x=\"" << M - 8 << "\" y=\"" << detail::svg_num(py(fy) + 3)
      << "\" text-anchor=\"end\" font-size=\"10\">" << detail::svg_num(fy)
      << "</text>\n";
  }
  // reference markers
  for (auto [rx, ry] : spec.reference_points) {
    const double x = px(rx), y = py(ry);
    s << "<line x1=\"" << detail::svg_num(x - 6) << "\" y1=\"" << detail::svg_num(y)
      << "\" x2=\"" << detail::svg_num(x + 6) << "\" y2=\"" << detail::svg_num(y)
      << "\" stroke=\"gray\" stroke-width=\"2\"/>\n";
    s << "<line x1=\"" << detail::svg_num(x) << "\" y1=\"" << detail::svg_num(y - 6)
      << "\" x2=\"" << detail::svg_num(x) << "\" y2=\"" << detail::svg_num(y + 6)
      << "\" stroke=\"gray\" stroke-width=\"2\"/>\n";
  }
  // trajectory
  s << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\" points=\"";
  for (const auto& r : table.rows)
    s << detail::svg_num(px(r[cx])) << "," << detail::svg_num(py(r[cy])) << " ";
  s << "\"/>\n";
  const auto& first = table.rows.front();
  const auto& last = table.rows.back();
  s << "<circle cx=\"" << detail::svg_num(px(first[cx])) << "\" cy=\""
    << detail::svg_num(py(first[cy])) << "\" r=\"4\" fill=\"green\"/>\n";
  s << "<circle cx=\"" << detail::svg_num(px(last[cx])) << "\" cy=\""
    << detail::svg_num(py(last[cy])) << "\" r=\"4\" fill=\"red\"/>\n";
  s << "</svg>\n";
  return s.str();
}

inline void emit_plot(const std::string& trajectory_csv_path,
                      const std::string& out_svg_path, const PlotSpec& spec = {}) {
  CsvTable t = read_csv(trajectory_csv_path);
  const std::string svg = render_svg(t, spec);
  std::ofstream out(out_svg_path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + out_svg_path + "' for writing");
  out << svg;
}

}  // namespace rarts
