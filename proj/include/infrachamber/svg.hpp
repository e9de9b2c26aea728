#pragma once

// Minimal SVG line plots for the experiment outputs. The CSV files are the
// data of record; these are for looking at.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

namespace infrachamber::svg {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::string color = "#1f4e9c";
  bool markers = false;
};

struct Panel {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
  bool log_x = false;
};

namespace detail {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

inline std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

// 1-2-5 tick spacing giving roughly `target` ticks over [lo, hi].
inline double nice_step(double lo, double hi, int target) {
  const double raw = (hi - lo) / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double r = raw / mag;
  return (r < 1.5 ? 1.0 : r < 3.5 ? 2.0 : r < 7.5 ? 5.0 : 10.0) * mag;
}

inline void render_panel(std::string& out, const Panel& panel, double top, double width, double height) {
  const double left = 70, right = 20, pad_top = 30, bottom = 45;
  const double pw = width - left - right;
  const double ph = height - pad_top - bottom;
  const double y0 = top + pad_top;

  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymin = xmin, ymax = -xmin;
  auto fx = [&](double x) { return panel.log_x ? std::log10(x) : x; };
  for (const auto& s : panel.series) {
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (panel.log_x && !(s.x[i] > 0)) continue;
      xmin = std::min(xmin, fx(s.x[i]));
      xmax = std::max(xmax, fx(s.x[i]));
      ymin = std::min(ymin, s.y[i]);
      ymax = std::max(ymax, s.y[i]);
    }
  }
  if (!std::isfinite(xmin)) xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  if (xmax <= xmin) xmax = xmin + 1;
  if (ymax <= ymin) ymax = ymin + 1;
  const double ypad = 0.05 * (ymax - ymin);
  ymin -= ypad;
  ymax += ypad;

  auto px = [&](double x) { return left + (fx(x) - xmin) / (xmax - xmin) * pw; };
  auto py = [&](double y) { return y0 + (ymax - y) / (ymax - ymin) * ph; };

  out += "<text x='" + num(left + pw / 2) + "' y='" + num(top + 18) +
         "' text-anchor='middle' font-size='14'>" + escape(panel.title) + "</text>\n";
  out += "<rect x='" + num(left) + "' y='" + num(y0) + "' width='" + num(pw) + "' height='" + num(ph) +
         "' fill='none' stroke='black'/>\n";

  const double ystep = nice_step(ymin, ymax, 5);
  for (double t = std::ceil(ymin / ystep) * ystep; t <= ymax; t += ystep) {
    out += "<line x1='" + num(left) + "' y1='" + num(py(t)) + "' x2='" + num(left + pw) + "' y2='" + num(py(t)) +
           "' stroke='#dddddd'/>\n";
    out += "<text x='" + num(left - 6) + "' y='" + num(py(t) + 4) + "' text-anchor='end' font-size='11'>" +
           tick_label(std::abs(t) < 1e-12 * ystep ? 0.0 : t) + "</text>\n";
  }
  if (panel.log_x) {
    for (double decade = std::floor(xmin); decade <= xmax; decade += 1.0)
      for (int m : {1, 2, 5}) {
        const double lx = decade + std::log10(static_cast<double>(m));
        if (lx < xmin || lx > xmax) continue;
        const double x = left + (lx - xmin) / (xmax - xmin) * pw;
        out += "<text x='" + num(x) + "' y='" + num(y0 + ph + 16) + "' text-anchor='middle' font-size='11'>" +
               tick_label(std::pow(10.0, lx)) + "</text>\n";
      }
  } else {
    const double xstep = nice_step(xmin, xmax, 8);
    for (double t = std::ceil(xmin / xstep) * xstep; t <= xmax; t += xstep)
      out += "<text x='" + num(px(t)) + "' y='" + num(y0 + ph + 16) + "' text-anchor='middle' font-size='11'>" +
             tick_label(std::abs(t) < 1e-12 * xstep ? 0.0 : t) + "</text>\n";
  }
  out += "<text x='" + num(left + pw / 2) + "' y='" + num(y0 + ph + 36) +
         "' text-anchor='middle' font-size='12'>" + escape(panel.x_label) + "</text>\n";
  out += "<text x='16' y='" + num(y0 + ph / 2) + "' text-anchor='middle' font-size='12' transform='rotate(-90 16 " +
         num(y0 + ph / 2) + ")'>" + escape(panel.y_label) + "</text>\n";

  double legend_y = y0 + 14;
  for (const auto& s : panel.series) {
    const std::size_t n = std::min(s.x.size(), s.y.size());
    const std::size_t stride = std::max<std::size_t>(1, n / 4000);
    out += "<polyline fill='none' stroke='" + s.color + "' stroke-width='1.2' points='";
    for (std::size_t i = 0; i < n; i += stride) {
      if (panel.log_x && !(s.x[i] > 0)) continue;
      out += num(px(s.x[i])) + "," + num(py(s.y[i])) + " ";
    }
    out += "'/>\n";
    if (s.markers)
      for (std::size_t i = 0; i < n; ++i)
        out += "<circle cx='" + num(px(s.x[i])) + "' cy='" + num(py(s.y[i])) + "' r='2.5' fill='" + s.color + "'/>\n";
    if (!s.label.empty()) {
      out += "<text x='" + num(left + pw - 8) + "' y='" + num(legend_y) + "' text-anchor='end' font-size='11' fill='" +
             s.color + "'>" + escape(s.label) + "</text>\n";
      legend_y += 14;
    }
  }
}

}  // namespace detail

/// Panels stacked vertically, each with its own axes.
inline std::string render(const std::vector<Panel>& panels, double width = 900, double panel_height = 320) {
  const double height = panel_height * static_cast<double>(panels.size());
  std::string out = "<svg xmlns='http://www.w3.org/2000/svg' width='" + detail::num(width) + "' height='" +
                    detail::num(height) + "' viewBox='0 0 " + detail::num(width) + " " + detail::num(height) +
                    "' font-family='sans-serif'>\n";
  out += "<rect x='0' y='0' width='100%' height='100%' fill='white'/>\n";
  for (std::size_t i = 0; i < panels.size(); ++i)
    detail::render_panel(out, panels[i], panel_height * static_cast<double>(i), width, panel_height);
  out += "</svg>\n";
  return out;
}

inline std::vector<double> time_axis(std::size_t n, double sample_rate, double t0 = 0.0) {
  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = t0 + static_cast<double>(i) / sample_rate;
  return t;
}

}  // namespace infrachamber::svg
