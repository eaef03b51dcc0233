#pragma once

// SVG charts from a summary CSV: mean loss against sigma ("lines") and
// quartile boxes per grid point and method ("box").

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "permsync/error.hpp"
#include "permsync/format.hpp"

namespace permsync {

struct SummaryRecord {
  double sigma = 0.0;
  std::string method;
  double mean = 0.0, median = 0.0, q1 = 0.0, q3 = 0.0, min = 0.0, max = 0.0;
  std::optional<double> fence_lo, fence_hi;
};

/// Parses a summary CSV. Rows without statistics (every trial failed) are skipped.
inline std::vector<SummaryRecord> parse_summary_csv(std::string_view text) {
  const auto lines = split_lines(text);
  if (lines.empty()) throw FormatError("summary CSV is empty");
  const auto header = split_csv_row(lines[0]);
  std::map<std::string, std::size_t, std::less<>> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[std::string(header[i])] = i;
  for (const char* name : {"sigma", "method", "mean", "median", "q1", "q3", "min", "max"})
    if (!col.contains(name)) throw FormatError(std::string("summary CSV: missing column '") + name + "'");

  std::vector<SummaryRecord> out;
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto cells = split_csv_row(lines[r]);
    if (cells.size() != header.size()) throw FormatError("summary CSV: row " + std::to_string(r) + " has wrong width");
    auto cell = [&](const char* name) { return cells[col.find(name)->second]; };
    if (cell("mean").empty()) continue;
    SummaryRecord rec;
    rec.sigma = parse_double(cell("sigma"));
    rec.method = std::string(cell("method"));
    if (rec.method.empty()) throw FormatError("summary CSV: empty method");
    rec.mean = parse_double(cell("mean"));
    rec.median = parse_double(cell("median"));
    rec.q1 = parse_double(cell("q1"));
    rec.q3 = parse_double(cell("q3"));
    rec.min = parse_double(cell("min"));
    rec.max = parse_double(cell("max"));
    if (col.contains("fence_lo") && !cell("fence_lo").empty()) rec.fence_lo = parse_double(cell("fence_lo"));
    if (col.contains("fence_hi") && !cell("fence_hi").empty()) rec.fence_hi = parse_double(cell("fence_hi"));
    out.push_back(std::move(rec));
  }
  if (out.empty()) throw FormatError("summary CSV has no data rows");
  return out;
}

enum class PlotStyle { lines, box };

namespace detail {

struct Frame {
  double width = 720, height = 420;
  double left = 70, right = 150, top = 40, bottom = 60;
  double plot_w() const { return width - left - right; }
  double plot_h() const { return height - top - bottom; }
};

inline std::string num(double x) { return format_fixed(x, 2); }

inline std::string series_color(std::string_view method, std::size_t index) {
  if (method == "anchored") return "#1f77b4";
  if (method == "vanilla") return "#d62728";
  static const char* kCycle[] = {"#2ca02c", "#9467bd", "#8c564b", "#7f7f7f"};
  return kCycle[index % 4];
}

/// Upper end of the loss axis.
inline double axis_top(double value) {
  if (!(value > 0.0)) return 0.01;
  const double step = std::pow(10.0, std::floor(std::log10(value)));
  for (double m : {1.0, 2.0, 2.5, 5.0, 10.0})
    if (m * step >= value * 1.05) return m * step;
  return 10.0 * step;
}

inline std::string svg_open(const Frame& f, std::string_view title) {
  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(f.width) + "\" height=\"" +
                  num(f.height) + "\" viewBox=\"0 0 " + num(f.width) + " " + num(f.height) + "\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"" + num(f.left + f.plot_w() / 2) + "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
       "font-size=\"15\">" + std::string(title) + "</text>\n";
  return s;
}

inline std::string y_axis(const Frame& f, double ymax, std::string_view label) {
  std::string s;
  const double x0 = f.left, y0 = f.top + f.plot_h();
  s += "<line x1=\"" + num(x0) + "\" y1=\"" + num(f.top) + "\" x2=\"" + num(x0) + "\" y2=\"" + num(y0) +
       "\" stroke=\"black\"/>\n";
  s += "<line x1=\"" + num(x0) + "\" y1=\"" + num(y0) + "\" x2=\"" + num(x0 + f.plot_w()) + "\" y2=\"" + num(y0) +
       "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double v = ymax * i / 5.0;
    const double y = y0 - f.plot_h() * i / 5.0;
    s += "<line x1=\"" + num(x0 - 4) + "\" y1=\"" + num(y) + "\" x2=\"" + num(x0) + "\" y2=\"" + num(y) +
         "\" stroke=\"black\"/>\n";
    s += "<text x=\"" + num(x0 - 7) + "\" y=\"" + num(y + 4) +
         "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" + format_fixed(v, 4) + "</text>\n";
  }
  s += "<text x=\"18\" y=\"" + num(f.top + f.plot_h() / 2) + "\" transform=\"rotate(-90 18 " +
       num(f.top + f.plot_h() / 2) + ")\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" +
       std::string(label) + "</text>\n";
  return s;
}

inline std::string legend(const Frame& f, const std::vector<std::string>& methods) {
  std::string s = "<g class=\"legend\">\n";
  for (std::size_t i = 0; i < methods.size(); ++i) {
    const double y = f.top + 10 + 22.0 * static_cast<double>(i);
    const double x = f.width - f.right + 20;
    s += "<g class=\"legend-entry\"><rect x=\"" + num(x) + "\" y=\"" + num(y - 9) +
         "\" width=\"14\" height=\"10\" fill=\"" + series_color(methods[i], i) + "\"/><text x=\"" + num(x + 20) +
         "\" y=\"" + num(y) + "\" font-family=\"sans-serif\" font-size=\"12\">" + methods[i] + "</text></g>\n";
  }
  return s + "</g>\n";
}

}  // namespace detail

/// Deterministic SVG rendering of parsed summary rows.
inline std::string render_svg(const std::vector<SummaryRecord>& rows, PlotStyle style) {
  detail::require(!rows.empty(), "render_svg: no rows");
  std::vector<std::string> methods;
  std::vector<double> sigmas;
  for (const auto& r : rows) {
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) methods.push_back(r.method);
    if (std::find(sigmas.begin(), sigmas.end(), r.sigma) == sigmas.end()) sigmas.push_back(r.sigma);
  }
  // Sigma decreases left to right.
  std::sort(sigmas.begin(), sigmas.end(), std::greater<>());
  auto sigma_slot = [&](double s) {
    return static_cast<std::size_t>(std::find(sigmas.begin(), sigmas.end(), s) - sigmas.begin());
  };

  detail::Frame f;
  using detail::num;
  std::string svg;
  if (style == PlotStyle::lines) {
    double ymax = 0.0;
    for (const auto& r : rows) ymax = std::max(ymax, r.mean);
    ymax = detail::axis_top(ymax);
    const double s_hi = sigmas.front(), s_lo = sigmas.back();
    auto x_of = [&](double s) {
      if (s_hi == s_lo) return f.left + f.plot_w() / 2;
      return f.left + f.plot_w() * (s_hi - s) / (s_hi - s_lo);
    };
    auto y_of = [&](double v) { return f.top + f.plot_h() * (1.0 - v / ymax); };
    svg = detail::svg_open(f, "Mean normalized Hamming loss");
    svg += detail::y_axis(f, ymax, "mean loss");
    for (double s : sigmas) {
      const double x = x_of(s);
      svg += "<text x=\"" + num(x) + "\" y=\"" + num(f.top + f.plot_h() + 18) +
             "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" + format_double(s) + "</text>\n";
    }
    svg += "<text x=\"" + num(f.left + f.plot_w() / 2) + "\" y=\"" + num(f.height - 15) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">sigma (decreasing)</text>\n";
    for (std::size_t mi = 0; mi < methods.size(); ++mi) {
      std::vector<const SummaryRecord*> pts;
      for (const auto& r : rows)
        if (r.method == methods[mi]) pts.push_back(&r);
      std::sort(pts.begin(), pts.end(), [](auto* a, auto* b) { return a->sigma > b->sigma; });
      const std::string color = detail::series_color(methods[mi], mi);
      svg += "<g class=\"series\" data-method=\"" + methods[mi] + "\">\n<polyline fill=\"none\" stroke=\"" + color +
             "\" stroke-width=\"2\" points=\"";
      for (std::size_t i = 0; i < pts.size(); ++i)
        svg += (i ? " " : "") + num(x_of(pts[i]->sigma)) + "," + num(y_of(pts[i]->mean));
      svg += "\"/>\n";
      for (auto* p : pts)
        svg += "<circle cx=\"" + num(x_of(p->sigma)) + "\" cy=\"" + num(y_of(p->mean)) + "\" r=\"3\" fill=\"" + color +
               "\"/>\n";
      svg += "</g>\n";
    }
  } else {
    double ymax = 0.0;
    for (const auto& r : rows) ymax = std::max(ymax, r.max);
    ymax = detail::axis_top(ymax);
    auto y_of = [&](double v) { return f.top + f.plot_h() * (1.0 - v / ymax); };
    const double group_w = f.plot_w() / static_cast<double>(sigmas.size());
    const double box_w = std::min(40.0, 0.7 * group_w / static_cast<double>(methods.size()));
    svg = detail::svg_open(f, "Loss distribution per trial");
    svg += detail::y_axis(f, ymax, "loss");
    for (std::size_t si = 0; si < sigmas.size(); ++si) {
      svg += "<text x=\"" + num(f.left + group_w * (static_cast<double>(si) + 0.5)) + "\" y=\"" +
             num(f.top + f.plot_h() + 18) + "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" +
             format_double(sigmas[si]) + "</text>\n";
    }
    svg += "<text x=\"" + num(f.left + f.plot_w() / 2) + "\" y=\"" + num(f.height - 15) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">sigma (decreasing)</text>\n";
    for (std::size_t mi = 0; mi < methods.size(); ++mi) {
      const std::string color = detail::series_color(methods[mi], mi);
      svg += "<g class=\"series\" data-method=\"" + methods[mi] + "\">\n";
      for (const auto& r : rows) {
        if (r.method != methods[mi]) continue;
        const double group_x = f.left + group_w * static_cast<double>(sigma_slot(r.sigma));
        const double cx = group_x + group_w * 0.5 +
                          box_w * (static_cast<double>(mi) - 0.5 * static_cast<double>(methods.size() - 1)) * 1.2;
        const double x0 = cx - box_w / 2, x1 = cx + box_w / 2;
        const double w_lo = r.fence_lo ? std::max(r.min, *r.fence_lo) : r.min;
        const double w_hi = r.fence_hi ? std::min(r.max, *r.fence_hi) : r.max;
        svg += "<line class=\"whisker\" x1=\"" + num(cx) + "\" y1=\"" + num(y_of(w_lo)) + "\" x2=\"" + num(cx) +
               "\" y2=\"" + num(y_of(w_hi)) + "\" stroke=\"" + color + "\"/>\n";
        if (r.q3 > r.q1) {
          svg += "<rect class=\"box\" x=\"" + num(x0) + "\" y=\"" + num(y_of(r.q3)) + "\" width=\"" + num(box_w) +
                 "\" height=\"" + num(y_of(r.q1) - y_of(r.q3)) + "\" fill=\"" + color +
                 "\" fill-opacity=\"0.25\" stroke=\"" + color + "\"/>\n";
        } else {
          svg += "<line class=\"box-degenerate\" x1=\"" + num(x0) + "\" y1=\"" + num(y_of(r.q1)) + "\" x2=\"" +
                 num(x1) + "\" y2=\"" + num(y_of(r.q1)) + "\" stroke=\"" + color + "\"/>\n";
        }
        svg += "<line class=\"median\" x1=\"" + num(x0) + "\" y1=\"" + num(y_of(r.median)) + "\" x2=\"" + num(x1) +
               "\" y2=\"" + num(y_of(r.median)) + "\" stroke=\"" + color + "\" stroke-width=\"3\"/>\n";
        for (double v : {r.min, r.max})
          if ((r.fence_lo && v < *r.fence_lo) || (r.fence_hi && v > *r.fence_hi))
            svg += "<circle class=\"outlier\" cx=\"" + num(cx) + "\" cy=\"" + num(y_of(v)) +
                   "\" r=\"2.5\" fill=\"none\" stroke=\"" + color + "\" stroke-dasharray=\"1,1\"/>\n";
      }
      svg += "</g>\n";
    }
  }
  svg += detail::legend(f, methods);
  svg += "</svg>\n";
  return svg;
}

}  // namespace permsync
