#pragma once

// Minimal self-contained SVG chart writer for run reports: stacked panels of
// time-series lines, optional shaded bands (comfort corridors), step plots
// for setpoints, and simple grouped bar charts. No external dependencies; the
// output is a single standalone .svg file.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace railtherm::plot {

inline const std::vector<std::string> kPalette = {
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::string color;     // empty: auto from palette
  bool step = false;     // draw as zero-order-hold steps
  double width = 1.4;
};

// Shaded rectangle in data coordinates (e.g. a comfort band).
struct Band {
  double x0 = 0.0, x1 = 0.0, y0 = 0.0, y1 = 0.0;
  std::string color = "#d0e4f5";
  double opacity = 0.5;
};

struct Bars {
  std::vector<std::string> labels;       // one per group
  std::vector<double> a;                 // first value per group
  std::vector<double> b;                 // second value per group (optional)
  std::string label_a = "a", label_b = "b";
  std::string color_a = "#1f77b4", color_b = "#d62728";
};

struct Panel {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
  std::vector<Band> bands;
  Bars bars;          // used when `series` is empty and bars.labels is not
  bool has_bars() const { return series.empty() && !bars.labels.empty(); }
};

namespace detail {

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

inline std::string escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out += c;
    }
  }
  return out;
}

// ~n "nice" tick positions covering [lo, hi] using a 1-2-5 progression.
inline std::vector<double> ticks(double lo, double hi, int n = 5) {
  if (!(hi > lo)) return {lo};
  double raw = (hi - lo) / std::max(1, n);
  double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double norm = raw / mag;
  double step = (norm <= 1.0 ? 1.0 : norm <= 2.0 ? 2.0 : norm <= 5.0 ? 5.0 : 10.0) * mag;
  std::vector<double> out;
  double t0 = std::ceil(lo / step) * step;
  for (double t = t0; t <= hi + 1e-9 * step; t += step) out.push_back(t);
  return out;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void add(double v) {
    if (std::isfinite(v)) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  void pad(double frac) {
    if (!(hi > lo)) {
      lo -= 1.0;
      hi += 1.0;
      return;
    }
    double p = frac * (hi - lo);
    lo -= p;
    hi += p;
  }
};

}  // namespace detail

// Renders panels stacked vertically into one SVG document.
inline std::string render(const std::vector<Panel>& panels, int width = 960,
                          int panel_height = 260) {
  if (panels.empty()) throw std::runtime_error("plot: nothing to render");
  const int margin_l = 64, margin_r = 16, margin_t = 34, margin_b = 42;
  const int height = panel_height * static_cast<int>(panels.size());
  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) +
         "\" height=\"" + std::to_string(height) + "\" viewBox=\"0 0 " + std::to_string(width) +
         " " + std::to_string(height) + "\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg += "<style>text{font-family:sans-serif;}</style>\n";

  for (std::size_t pi = 0; pi < panels.size(); ++pi) {
    const Panel& p = panels[pi];
    const double top = static_cast<double>(panel_height * pi) + margin_t;
    const double left = margin_l;
    const double w = width - margin_l - margin_r;
    const double h = panel_height - margin_t - margin_b;

    svg += "<text x=\"" + detail::fmt(left) + "\" y=\"" + detail::fmt(top - 12) +
           "\" font-size=\"14\" font-weight=\"bold\">" + detail::escape(p.title) + "</text>\n";

    if (p.has_bars()) {
      const auto& bars = p.bars;
      detail::Range yr;
      yr.add(0.0);
      for (double v : bars.a) yr.add(v);
      for (double v : bars.b) yr.add(v);
      yr.pad(0.08);
      auto ymap = [&](double v) { return top + h - (v - yr.lo) / (yr.hi - yr.lo) * h; };
      const std::size_t n = bars.labels.size();
      const bool two = bars.b.size() == n;
      const double group_w = w / static_cast<double>(n);
      const double bar_w = two ? group_w * 0.32 : group_w * 0.55;
      for (double t : detail::ticks(yr.lo, yr.hi)) {
        double yy = ymap(t);
        svg += "<line x1=\"" + detail::fmt(left) + "\" y1=\"" + detail::fmt(yy) + "\" x2=\"" +
               detail::fmt(left + w) + "\" y2=\"" + detail::fmt(yy) +
               "\" stroke=\"#e0e0e0\" stroke-width=\"1\"/>\n";
        svg += "<text x=\"" + detail::fmt(left - 6) + "\" y=\"" + detail::fmt(yy + 4) +
               "\" font-size=\"11\" text-anchor=\"end\">" + detail::fmt(t) + "</text>\n";
      }
      for (std::size_t i = 0; i < n; ++i) {
        double cx = left + (static_cast<double>(i) + 0.5) * group_w;
        double xa = two ? cx - bar_w : cx - bar_w / 2.0;
        svg += "<rect x=\"" + detail::fmt(xa) + "\" y=\"" + detail::fmt(ymap(std::max(0.0, bars.a[i]))) +
               "\" width=\"" + detail::fmt(bar_w) + "\" height=\"" +
               detail::fmt(std::abs(ymap(bars.a[i]) - ymap(0.0))) + "\" fill=\"" + bars.color_a +
               "\"/>\n";
        if (two) {
          svg += "<rect x=\"" + detail::fmt(cx) + "\" y=\"" +
                 detail::fmt(ymap(std::max(0.0, bars.b[i]))) + "\" width=\"" + detail::fmt(bar_w) +
                 "\" height=\"" + detail::fmt(std::abs(ymap(bars.b[i]) - ymap(0.0))) +
                 "\" fill=\"" + bars.color_b + "\"/>\n";
        }
        svg += "<text x=\"" + detail::fmt(cx) + "\" y=\"" + detail::fmt(top + h + 16) +
               "\" font-size=\"11\" text-anchor=\"middle\">" + detail::escape(bars.labels[i]) +
               "</text>\n";
      }
      // Legend for the two bar colors.
      if (two) {
        double lx = left + w - 180;
        svg += "<rect x=\"" + detail::fmt(lx) + "\" y=\"" + detail::fmt(top + 4) +
               "\" width=\"10\" height=\"10\" fill=\"" + bars.color_a + "\"/>" + "<text x=\"" +
               detail::fmt(lx + 14) + "\" y=\"" + detail::fmt(top + 13) + "\" font-size=\"11\">" +
               detail::escape(bars.label_a) + "</text>\n";
        svg += "<rect x=\"" + detail::fmt(lx + 90) + "\" y=\"" + detail::fmt(top + 4) +
               "\" width=\"10\" height=\"10\" fill=\"" + bars.color_b + "\"/>" + "<text x=\"" +
               detail::fmt(lx + 104) + "\" y=\"" + detail::fmt(top + 13) + "\" font-size=\"11\">" +
               detail::escape(bars.label_b) + "</text>\n";
      }
    } else {
      detail::Range xr, yr;
      for (const Series& s : p.series) {
        for (double v : s.x) xr.add(v);
        for (double v : s.y) yr.add(v);
      }
      for (const Band& b : p.bands) {
        yr.add(b.y0);
        yr.add(b.y1);
      }
      if (!std::isfinite(xr.lo) || !std::isfinite(yr.lo)) {
        xr.lo = 0.0; xr.hi = 1.0; yr.lo = 0.0; yr.hi = 1.0;
      }
      yr.pad(0.08);
      if (!(xr.hi > xr.lo)) xr.pad(0.5);
      auto xmap = [&](double v) { return left + (v - xr.lo) / (xr.hi - xr.lo) * w; };
      auto ymap = [&](double v) { return top + h - (v - yr.lo) / (yr.hi - yr.lo) * h; };

      for (const Band& b : p.bands) {
        double x0 = xmap(std::max(b.x0, xr.lo)), x1 = xmap(std::min(b.x1, xr.hi));
        double y0 = ymap(b.y0), y1 = ymap(b.y1);
        svg += "<rect x=\"" + detail::fmt(std::min(x0, x1)) + "\" y=\"" +
               detail::fmt(std::min(y0, y1)) + "\" width=\"" + detail::fmt(std::abs(x1 - x0)) +
               "\" height=\"" + detail::fmt(std::abs(y1 - y0)) + "\" fill=\"" + b.color +
               "\" opacity=\"" + detail::fmt(b.opacity) + "\"/>\n";
      }
      for (double t : detail::ticks(yr.lo, yr.hi)) {
        double yy = ymap(t);
        svg += "<line x1=\"" + detail::fmt(left) + "\" y1=\"" + detail::fmt(yy) + "\" x2=\"" +
               detail::fmt(left + w) + "\" y2=\"" + detail::fmt(yy) +
               "\" stroke=\"#e0e0e0\" stroke-width=\"1\"/>\n";
        svg += "<text x=\"" + detail::fmt(left - 6) + "\" y=\"" + detail::fmt(yy + 4) +
               "\" font-size=\"11\" text-anchor=\"end\">" + detail::fmt(t) + "</text>\n";
      }
      for (double t : detail::ticks(xr.lo, xr.hi, 8)) {
        double xx = xmap(t);
        svg += "<line x1=\"" + detail::fmt(xx) + "\" y1=\"" + detail::fmt(top + h) + "\" x2=\"" +
               detail::fmt(xx) + "\" y2=\"" + detail::fmt(top + h + 4) +
               "\" stroke=\"#808080\" stroke-width=\"1\"/>\n";
        svg += "<text x=\"" + detail::fmt(xx) + "\" y=\"" + detail::fmt(top + h + 16) +
               "\" font-size=\"11\" text-anchor=\"middle\">" + detail::fmt(t) + "</text>\n";
      }

      int color_idx = 0;
      double legend_x = left + 8;
      for (const Series& s : p.series) {
        if (s.x.size() != s.y.size()) throw std::runtime_error("plot: series x/y length mismatch");
        std::string color = s.color.empty()
                                ? kPalette[static_cast<std::size_t>(color_idx) % kPalette.size()]
                                : s.color;
        ++color_idx;
        std::string path;
        bool pen_down = false;
        for (std::size_t i = 0; i < s.x.size(); ++i) {
          if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) {
            pen_down = false;
            continue;
          }
          double px = xmap(s.x[i]);
          double py = ymap(s.y[i]);
          if (!pen_down) {
            path += "M" + detail::fmt(px) + " " + detail::fmt(py);
            pen_down = true;
          } else if (s.step) {
            path += " H" + detail::fmt(px) + " V" + detail::fmt(py);
          } else {
            path += " L" + detail::fmt(px) + " " + detail::fmt(py);
          }
        }
        svg += "<path d=\"" + path + "\" fill=\"none\" stroke=\"" + color + "\" stroke-width=\"" +
               detail::fmt(s.width) + "\"/>\n";
        if (!s.label.empty()) {
          svg += "<line x1=\"" + detail::fmt(legend_x) + "\" y1=\"" + detail::fmt(top + 8) +
                 "\" x2=\"" + detail::fmt(legend_x + 18) + "\" y2=\"" + detail::fmt(top + 8) +
                 "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
          svg += "<text x=\"" + detail::fmt(legend_x + 22) + "\" y=\"" + detail::fmt(top + 12) +
                 "\" font-size=\"11\">" + detail::escape(s.label) + "</text>\n";
          legend_x += 30.0 + 7.0 * static_cast<double>(s.label.size());
        }
      }
    }

    // Axis frame + labels.
    svg += "<rect x=\"" + detail::fmt(left) + "\" y=\"" + detail::fmt(top) + "\" width=\"" +
           detail::fmt(w) + "\" height=\"" + detail::fmt(h) +
           "\" fill=\"none\" stroke=\"#404040\" stroke-width=\"1\"/>\n";
    if (!p.x_label.empty()) {
      svg += "<text x=\"" + detail::fmt(left + w / 2) + "\" y=\"" + detail::fmt(top + h + 32) +
             "\" font-size=\"12\" text-anchor=\"middle\">" + detail::escape(p.x_label) +
             "</text>\n";
    }
    if (!p.y_label.empty()) {
      double cy = top + h / 2;
      svg += "<text x=\"14\" y=\"" + detail::fmt(cy) +
             "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 14 " +
             detail::fmt(cy) + ")\">" + detail::escape(p.y_label) + "</text>\n";
    }
  }
  svg += "</svg>\n";
  return svg;
}

inline void write_svg(const std::string& path, const std::vector<Panel>& panels, int width = 960,
                      int panel_height = 260) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("plot: cannot open " + path + " for writing");
  f << render(panels, width, panel_height);
  if (!f.good()) throw std::runtime_error("plot: write failed for " + path);
}

}  // namespace railtherm::plot
