#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "xqc/core/common.hpp"

namespace xqc::cli {

// Minimal deterministic SVG emitter: fixed formatting, no external state, so
// identical inputs produce identical bytes.
class SvgCanvas {
public:
  SvgCanvas(int width, int height) : width_(width), height_(height) {}

  void line(double x1, double y1, double x2, double y2, const std::string& stroke,
            double stroke_width = 1.0) {
    body_ << "<line x1=\"" << fmt6(x1) << "\" y1=\"" << fmt6(y1) << "\" x2=\"" << fmt6(x2)
          << "\" y2=\"" << fmt6(y2) << "\" stroke=\"" << stroke << "\" stroke-width=\""
          << fmt6(stroke_width) << "\"/>\n";
  }

  void polyline(const std::vector<std::pair<double, double>>& pts, const std::string& stroke) {
    if (pts.empty()) return;
    body_ << "<polyline fill=\"none\" stroke=\"" << stroke << "\" stroke-width=\"1.2\" points=\"";
    for (const auto& [x, y] : pts) body_ << fmt6(x) << "," << fmt6(y) << " ";
    body_ << "\"/>\n";
  }

  void circle(double x, double y, double r, const std::string& fill) {
    body_ << "<circle cx=\"" << fmt6(x) << "\" cy=\"" << fmt6(y) << "\" r=\"" << fmt6(r)
          << "\" fill=\"" << fill << "\"/>\n";
  }

  void text(double x, double y, const std::string& s, int size = 11,
            const std::string& anchor = "start") {
    body_ << "<text x=\"" << fmt6(x) << "\" y=\"" << fmt6(y) << "\" font-size=\"" << size
          << "\" font-family=\"monospace\" text-anchor=\"" << anchor << "\">" << escape(s)
          << "</text>\n";
  }

  std::string render() const {
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width_ << "\" height=\""
       << height_ << "\" viewBox=\"0 0 " << width_ << " " << height_ << "\">\n"
       << "<rect width=\"" << width_ << "\" height=\"" << height_ << "\" fill=\"white\"/>\n"
       << body_.str() << "</svg>\n";
    return os.str();
  }

private:
  int width_, height_;
  std::ostringstream body_;

  static std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
      if (c == '&') out += "&amp;";
      else if (c == '<') out += "&lt;";
      else if (c == '>') out += "&gt;";
      else out += c;
    }
    return out;
  }
};

struct Series {
  std::string label;
  std::string color;
  std::vector<std::pair<double, double>> points;
};

struct AxisBox {
  double x0, y0, x1, y1;        // pixel corners (y0 top)
  double xmin, xmax, ymin, ymax;  // data range

  double px(double x) const { return x0 + (x - xmin) / (xmax - xmin) * (x1 - x0); }
  double py(double y) const { return y1 - (y - ymin) / (ymax - ymin) * (y1 - y0); }
};

namespace detail {

inline void expand_range(double& lo, double& hi) {
  if (!(lo < hi)) {
    double pad = std::max(1.0, std::abs(lo)) * 0.5;
    lo -= pad;
    hi += pad;
  } else {
    double pad = (hi - lo) * 0.05;
    lo -= pad;
    hi += pad;
  }
}

inline AxisBox fit_axes(SvgCanvas& svg, double x0, double y0, double x1, double y1,
                        const std::vector<Series>& series, const std::string& title,
                        bool log_y = false) {
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const auto& s : series)
    for (auto [x, y] : s.points) {
      if (log_y && !(y > 0)) continue;
      double yy = log_y ? std::log10(y) : y;
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, yy);
      ymax = std::max(ymax, yy);
    }
  if (xmin > xmax) {
    xmin = 0;
    xmax = 1;
    ymin = 0;
    ymax = 1;
  }
  expand_range(xmin, xmax);
  expand_range(ymin, ymax);
  AxisBox box{x0, y0, x1, y1, xmin, xmax, ymin, ymax};
  svg.line(x0, y1, x1, y1, "black");
  svg.line(x0, y0, x0, y1, "black");
  svg.text((x0 + x1) / 2, y0 - 6, title, 12, "middle");
  for (int i = 0; i <= 4; ++i) {
    double fx = xmin + (xmax - xmin) * i / 4.0;
    double px = box.px(fx);
    svg.line(px, y1, px, y1 + 4, "black");
    svg.text(px, y1 + 16, fmt6(fx), 9, "middle");
    double fy = ymin + (ymax - ymin) * i / 4.0;
    double py = box.py(fy);
    svg.line(x0 - 4, py, x0, py, "black");
    svg.text(x0 - 6, py + 3, log_y ? ("1e" + fmt6(fy)) : fmt6(fy), 9, "end");
  }
  return box;
}

}  // namespace detail

// Multi-series line plot; y may be drawn in log10.
inline std::string line_plot_svg(const std::string& title, const std::vector<Series>& series,
                                 bool log_y = false, int width = 560, int height = 360) {
  SvgCanvas svg(width, height);
  AxisBox box = detail::fit_axes(svg, 60, 28, width - 16, height - 32, series, title, log_y);
  int li = 0;
  for (const auto& s : series) {
    std::vector<std::pair<double, double>> px;
    for (auto [x, y] : s.points) {
      if (log_y && !(y > 0)) continue;
      px.emplace_back(box.px(x), box.py(log_y ? std::log10(y) : y));
    }
    svg.polyline(px, s.color);
    if (!s.label.empty()) {
      svg.text(66, 44 + 14 * li, s.label, 10);
      svg.line(62, 40 + 14 * li, 64, 40 + 14 * li, s.color, 6);
      ++li;
    }
  }
  return svg.render();
}

inline std::string scatter_plot_svg(const std::string& title, const std::vector<Series>& series,
                                    bool log_x = false, int width = 560, int height = 360) {
  // log_x handled by pre-transforming points
  std::vector<Series> shown = series;
  std::string t = title;
  if (log_x) {
    for (auto& s : shown) {
      std::vector<std::pair<double, double>> pts;
      for (auto [x, y] : s.points)
        if (x > 0) pts.emplace_back(std::log10(x), y);
      s.points = std::move(pts);
    }
    t += " (log10 x)";
  }
  SvgCanvas svg(width, height);
  AxisBox box = detail::fit_axes(svg, 60, 28, width - 16, height - 32, shown, t);
  int li = 0;
  for (const auto& s : shown) {
    for (auto [x, y] : s.points) svg.circle(box.px(x), box.py(y), 3.0, s.color);
    if (!s.label.empty()) {
      svg.circle(62, 40 + 14 * li, 3.0, s.color);
      svg.text(68, 44 + 14 * li, s.label, 10);
      ++li;
    }
  }
  return svg.render();
}

// Vertical tick strip per checkpoint: eigenvalue positions on a symmetric
// log-ish scale, tick length weighted by ritz weight.
inline std::string strip_plot_svg(const std::string& title,
                                  const std::vector<std::pair<double, std::vector<double>>>& cols,
                                  int width = 560, int height = 360) {
  SvgCanvas svg(width, height);
  std::vector<Series> flat(1);
  auto squash = [](double v) {  // sign(v) * log10(1 + |v| / 1e-8)
    return (v < 0 ? -1.0 : 1.0) * std::log10(1.0 + std::abs(v) / 1e-8);
  };
  for (const auto& [step, values] : cols)
    for (double v : values) flat[0].points.emplace_back(step, squash(v));
  AxisBox box = detail::fit_axes(svg, 60, 28, width - 16, height - 32, flat,
                                 title + " (squashed log scale)");
  for (const auto& [step, values] : cols)
    for (double v : values)
      svg.line(box.px(step) - 4, box.py(squash(v)), box.px(step) + 4, box.py(squash(v)),
               "#3366bb", 1.0);
  return svg.render();
}

inline std::string cell_color(const std::string& cell) {
  if (cell.rfind("bn", 0) == 0) return "#3366bb";
  if (cell.rfind("ln", 0) == 0) return "#339955";
  return "#bb4433";
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write " + path);
  f.write(content.data(), static_cast<std::streamsize>(content.size()));
}

}  // namespace xqc::cli
