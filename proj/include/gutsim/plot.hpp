// Copyright 2026 The gutsim Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================

#ifndef GUTSIM_PLOT_HPP
#define GUTSIM_PLOT_HPP

#include "gutsim/harness.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

namespace gutsim {

inline constexpr double kPlotFloor = 1e-16;

struct PlotSeries {
  std::string label;
  const MetricTrace* trace = nullptr;
};

namespace plot_detail {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline constexpr std::array<const char*, 6> kColors{"#1f77b4", "#d62728", "#2ca02c",
                                                    "#9467bd", "#ff7f0e", "#17becf"};

struct Panel {
  double x0, y0, w, h;
};

using Points = std::vector<std::pair<double, double>>;

inline void draw_panel(std::ostream& out, const Panel& p, const std::string& title,
                       const std::vector<Points>& series, bool log_y) {
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (const auto& s : series) {
    for (auto [x, y] : s) {
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  }
  out << "<rect x=\"" << num(p.x0) << "\" y=\"" << num(p.y0) << "\" width=\"" << num(p.w)
      << "\" height=\"" << num(p.h) << "\" fill=\"none\" stroke=\"#444\"/>\n";
  out << "<text x=\"" << num(p.x0 + p.w / 2) << "\" y=\"" << num(p.y0 - 8)
      << "\" text-anchor=\"middle\" font-size=\"13\">" << escape(title) << "</text>\n";
  if (!std::isfinite(xmin)) {
    out << "<text x=\"" << num(p.x0 + p.w / 2) << "\" y=\"" << num(p.y0 + p.h / 2)
        << "\" text-anchor=\"middle\" font-size=\"12\">no data</text>\n";
    return;
  }
  if (xmax == xmin) xmax = xmin + 1.0;
  if (ymax == ymin) {
    ymax += log_y ? 1.0 : std::max(1.0, std::abs(ymax) * 0.1);
    ymin -= log_y ? 1.0 : std::max(1.0, std::abs(ymin) * 0.1);
  }
  auto sx = [&](double x) { return p.x0 + (x - xmin) / (xmax - xmin) * p.w; };
  auto sy = [&](double y) { return p.y0 + p.h - (y - ymin) / (ymax - ymin) * p.h; };

  auto label = [&](double y) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", log_y ? std::pow(10.0, y) : y);
    return std::string(buf);
  };
  for (double y : {ymin, ymax}) {
    out << "<text x=\"" << num(p.x0 - 4) << "\" y=\"" << num(sy(y) + 4)
        << "\" text-anchor=\"end\" font-size=\"10\">" << label(y) << "</text>\n";
  }
  for (double x : {xmin, xmax}) {
    out << "<text x=\"" << num(sx(x)) << "\" y=\"" << num(p.y0 + p.h + 14)
        << "\" text-anchor=\"middle\" font-size=\"10\">" << static_cast<std::uint64_t>(x)
        << "</text>\n";
  }

  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = kColors[k % kColors.size()];
    if (s.size() == 1) {
      out << "<circle cx=\"" << num(sx(s[0].first)) << "\" cy=\"" << num(sy(s[0].second))
          << "\" r=\"3\" fill=\"" << color << "\"/>\n";
      continue;
    }
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i) out << ' ';
      out << num(sx(s[i].first)) << ',' << num(sy(s[i].second));
    }
    out << "\"/>\n";
  }
}

}  // namespace plot_detail

/// Self-contained SVG: consensus error (log scale, clamped at kPlotFloor) and
/// averaged-model loss against round, one coloured series per trace.
inline void write_svg(const std::vector<PlotSeries>& series, std::ostream& out) {
  using namespace plot_detail;
  if (series.empty()) throw InvalidArgument("plot: no series");
  for (const auto& s : series) {
    if (!s.trace || s.trace->empty()) throw InvalidArgument("plot: empty trace");
  }
  std::vector<Points> cons, loss;
  for (const auto& s : series) {
    Points c, l;
    for (const auto& r : s.trace->records) {
      const auto x = static_cast<double>(r.round);
      const double e = std::isfinite(r.consensus_error) ? std::max(r.consensus_error, kPlotFloor) : kPlotFloor;
      c.emplace_back(x, std::log10(e));
      if (r.avg_model_loss && std::isfinite(*r.avg_model_loss)) l.emplace_back(x, *r.avg_model_loss);
    }
    cons.push_back(std::move(c));
    loss.push_back(std::move(l));
  }

  const double width = 900, height = 380;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << ' ' << height << "\" font-family=\"sans-serif\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  draw_panel(out, {70, 40, 330, 260}, "consensus error (log10)", cons, true);
  draw_panel(out, {500, 40, 330, 260}, "averaged-model loss", loss, false);
  out << "<text x=\"450\" y=\"330\" text-anchor=\"middle\" font-size=\"11\">round</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const double y = 350;
    const double x = 70 + 140.0 * static_cast<double>(k);
    out << "<rect x=\"" << num(x) << "\" y=\"" << num(y - 9) << "\" width=\"12\" height=\"12\" fill=\""
        << kColors[k % kColors.size()] << "\"/>\n";
    out << "<text x=\"" << num(x + 16) << "\" y=\"" << num(y + 1) << "\" font-size=\"12\">"
        << escape(series[k].label) << "</text>\n";
  }
  out << "</svg>\n";
}

/// Writes the chart to path; throws std::runtime_error if it cannot be written.
inline void emit_plot(const std::vector<PlotSeries>& series, const std::string& path) {
  std::ofstream file(path);
  if (!file) throw std::runtime_error("cannot write plot to '" + path + "'");
  write_svg(series, file);
  if (!file) throw std::runtime_error("cannot write plot to '" + path + "'");
}

}  // namespace gutsim

#endif  // GUTSIM_PLOT_HPP
