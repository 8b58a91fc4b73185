#pragma once

#include "vinetraj/io.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace vinetraj::svg {

struct Series {
  std::vector<double> x, y;
  std::string color = "#000000";
  std::string dash;  // e.g. "4 3"; empty = solid
  std::string label;
  double width = 1.5;
};

namespace detail {

inline std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace detail

/// Minimal hand-emitted line plot: axes, ticks, polylines, legend.
inline std::string line_plot(const std::string& title, const std::string& xlabel,
                             const std::string& ylabel,
                             const std::vector<Series>& series, int width = 720,
                             int height = 480) {
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  for (const auto& s : series) {
    for (double v : s.x) { xmin = std::min(xmin, v); xmax = std::max(xmax, v); }
    for (double v : s.y) { ymin = std::min(ymin, v); ymax = std::max(ymax, v); }
  }
  if (!(xmin < xmax)) { xmin -= 1.0; xmax += 1.0; }
  if (!(ymin < ymax)) { ymin -= 1.0; ymax += 1.0; }
  const double xpad = 0.04 * (xmax - xmin), ypad = 0.06 * (ymax - ymin);
  xmin -= xpad; xmax += xpad; ymin -= ypad; ymax += ypad;

  const double ml = 62, mr = 14, mt = 30, mb = 46;
  const double pw = width - ml - mr, ph = height - mt - mb;
  auto px = [&](double v) { return ml + (v - xmin) / (xmax - xmin) * pw; };
  auto py = [&](double v) { return mt + (ymax - v) / (ymax - ymin) * ph; };

  std::string out;
  out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) +
         "\" height=\"" + std::to_string(height) + "\" viewBox=\"0 0 " +
         std::to_string(width) + " " + std::to_string(height) + "\">\n";
  out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out += "<text x=\"" + detail::fmt(ml + pw / 2) + "\" y=\"18\" text-anchor=\"middle\" "
         "font-family=\"sans-serif\" font-size=\"14\">" + title + "</text>\n";

  constexpr int kTicks = 5;
  for (int i = 0; i <= kTicks; ++i) {
    const double fx = xmin + (xmax - xmin) * i / kTicks;
    const double fy = ymin + (ymax - ymin) * i / kTicks;
    const double gx = px(fx), gy = py(fy);
    out += "<line x1=\"" + detail::fmt(gx) + "\" y1=\"" + detail::fmt(mt) +
           "\" x2=\"" + detail::fmt(gx) + "\" y2=\"" + detail::fmt(mt + ph) +
           "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
    out += "<line x1=\"" + detail::fmt(ml) + "\" y1=\"" + detail::fmt(gy) +
           "\" x2=\"" + detail::fmt(ml + pw) + "\" y2=\"" + detail::fmt(gy) +
           "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
    out += "<text x=\"" + detail::fmt(gx) + "\" y=\"" + detail::fmt(mt + ph + 16) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" +
           detail::fmt(fx) + "</text>\n";
    out += "<text x=\"" + detail::fmt(ml - 6) + "\" y=\"" + detail::fmt(gy + 4) +
           "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" +
           detail::fmt(fy) + "</text>\n";
  }
  out += "<rect x=\"" + detail::fmt(ml) + "\" y=\"" + detail::fmt(mt) + "\" width=\"" +
         detail::fmt(pw) + "\" height=\"" + detail::fmt(ph) +
         "\" fill=\"none\" stroke=\"#333333\"/>\n";
  out += "<text x=\"" + detail::fmt(ml + pw / 2) + "\" y=\"" +
         detail::fmt(height - 10.0) + "\" text-anchor=\"middle\" "
         "font-family=\"sans-serif\" font-size=\"12\">" + xlabel + "</text>\n";
  out += "<text x=\"16\" y=\"" + detail::fmt(mt + ph / 2) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
         "transform=\"rotate(-90 16 " + detail::fmt(mt + ph / 2) + ")\">" + ylabel +
         "</text>\n";

  for (const auto& s : series) {
    if (s.x.size() != s.y.size() || s.x.empty()) continue;
    out += "<polyline fill=\"none\" stroke=\"" + s.color + "\" stroke-width=\"" +
           detail::fmt(s.width) + "\"";
    if (!s.dash.empty()) out += " stroke-dasharray=\"" + s.dash + "\"";
    out += " points=\"";
    for (size_t i = 0; i < s.x.size(); ++i) {
      out += detail::fmt(px(s.x[i]));
      out += ',';
      out += detail::fmt(py(s.y[i]));
      out += ' ';
    }
    out += "\"/>\n";
  }

  double ly = mt + 16;
  for (const auto& s : series) {
    if (s.label.empty()) continue;
    const double lx = ml + pw - 150;
    out += "<line x1=\"" + detail::fmt(lx) + "\" y1=\"" + detail::fmt(ly - 4) +
           "\" x2=\"" + detail::fmt(lx + 28) + "\" y2=\"" + detail::fmt(ly - 4) +
           "\" stroke=\"" + s.color + "\" stroke-width=\"2\"";
    if (!s.dash.empty()) out += " stroke-dasharray=\"" + s.dash + "\"";
    out += "/>\n";
    out += "<text x=\"" + detail::fmt(lx + 34) + "\" y=\"" + detail::fmt(ly) +
           "\" font-family=\"sans-serif\" font-size=\"11\">" + s.label + "</text>\n";
    ly += 16;
  }
  out += "</svg>\n";
  return out;
}

inline void write_line_plot(const std::filesystem::path& path, const std::string& title,
                            const std::string& xlabel, const std::string& ylabel,
                            const std::vector<Series>& series, int width = 720,
                            int height = 480) {
  io::atomic_write(path, line_plot(title, xlabel, ylabel, series, width, height));
}

}  // namespace vinetraj::svg
