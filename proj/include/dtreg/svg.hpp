#ifndef DTREG_SVG_HPP
#define DTREG_SVG_HPP

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "dtreg/errors.hpp"

namespace dtreg {

/// One curve with a pointwise confidence band.
struct CurveBand {
  std::string label;
  std::string color = "#1f6fb4";
  std::vector<double> x;
  std::vector<double> estimate;
  std::vector<double> lo;
  std::vector<double> hi;
};

namespace svg_detail {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", v);
  return buf;
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(ch);
    }
  }
  return out;
}

}  // namespace svg_detail

/// Writes a step plot of each curve with its shaded pointwise band.  Each
/// band contributes a filled area plus one explicit path per boundary.
inline void write_svg_plot(const std::string& path, const std::string& title,
                           const std::string& x_label,
                           const std::vector<CurveBand>& curves) {
  if (curves.empty()) throw ConfigError("svg plot needs at least one curve");

  const double width = 760, height = 480;
  const double left = 70, right = 30, top = 48, bottom = 52;
  const double plot_w = width - left - right;
  const double plot_h = height - top - bottom;

  double x_min = curves[0].x.front(), x_max = curves[0].x.back();
  double y_min = 0.0, y_max = 0.0;
  for (const auto& c : curves) {
    x_min = std::min(x_min, c.x.front());
    x_max = std::max(x_max, c.x.back());
    for (double v : c.lo) y_min = std::min(y_min, v);
    for (double v : c.hi) y_max = std::max(y_max, v);
  }
  if (x_max == x_min) x_max = x_min + 1.0;
  double pad = 0.08 * (y_max - y_min);
  if (pad == 0.0) pad = 1e-3;
  y_min -= pad;
  y_max += pad;

  auto sx = [&](double x) { return left + (x - x_min) / (x_max - x_min) * plot_w; };
  auto sy = [&](double y) { return top + (y_max - y) / (y_max - y_min) * plot_h; };

  auto polyline = [&](const std::vector<double>& xs, const std::vector<double>& ys) {
    std::string d;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      d += (i == 0 ? "M" : "L");
      d += svg_detail::num(sx(xs[i])) + " " + svg_detail::num(sy(ys[i]));
    }
    return d;
  };

  std::ofstream out(path);
  if (!out) throw DataError("IoError: cannot open '" + path + "' for writing");
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << " "
      << height << "\">\n"
      << "<rect width=\"" << width << "\" height=\"" << height
      << "\" fill=\"white\"/>\n"
      << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" "
      << "font-family=\"sans-serif\" font-size=\"15\">"
      << svg_detail::escape(title) << "</text>\n";

  // axes and zero line
  out << "<line x1=\"" << left << "\" y1=\"" << top + plot_h << "\" x2=\""
      << left + plot_w << "\" y2=\"" << top + plot_h
      << "\" stroke=\"#333\" stroke-width=\"1\"/>\n"
      << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left
      << "\" y2=\"" << top + plot_h << "\" stroke=\"#333\" stroke-width=\"1\"/>\n";
  if (y_min < 0.0 && y_max > 0.0) {
    out << "<line x1=\"" << left << "\" y1=\"" << svg_detail::num(sy(0.0))
        << "\" x2=\"" << left + plot_w << "\" y2=\"" << svg_detail::num(sy(0.0))
        << "\" stroke=\"#999\" stroke-dasharray=\"4 3\" stroke-width=\"1\"/>\n";
  }

  for (const auto& c : curves) {
    // shaded band
    std::string area = polyline(c.x, c.hi);
    for (std::size_t i = c.x.size(); i-- > 0;) {
      area += "L" + svg_detail::num(sx(c.x[i])) + " " + svg_detail::num(sy(c.lo[i]));
    }
    area += "Z";
    out << "<path d=\"" << area << "\" fill=\"" << c.color
        << "\" fill-opacity=\"0.18\" stroke=\"none\"/>\n";
    // one path per band boundary
    out << "<path class=\"band-boundary\" d=\"" << polyline(c.x, c.lo)
        << "\" fill=\"none\" stroke=\"" << c.color
        << "\" stroke-opacity=\"0.45\" stroke-width=\"1\"/>\n";
    out << "<path class=\"band-boundary\" d=\"" << polyline(c.x, c.hi)
        << "\" fill=\"none\" stroke=\"" << c.color
        << "\" stroke-opacity=\"0.45\" stroke-width=\"1\"/>\n";
    // estimate as a step curve with point markers
    std::string d;
    for (std::size_t i = 0; i < c.x.size(); ++i) {
      if (i == 0) {
        d += "M" + svg_detail::num(sx(c.x[i])) + " " + svg_detail::num(sy(c.estimate[i]));
      } else {
        d += "L" + svg_detail::num(sx(c.x[i])) + " " + svg_detail::num(sy(c.estimate[i - 1]));
        d += "L" + svg_detail::num(sx(c.x[i])) + " " + svg_detail::num(sy(c.estimate[i]));
      }
    }
    out << "<path d=\"" << d << "\" fill=\"none\" stroke=\"" << c.color
        << "\" stroke-width=\"1.6\"/>\n";
    if (c.x.size() <= 60) {
      for (std::size_t i = 0; i < c.x.size(); ++i) {
        out << "<circle cx=\"" << svg_detail::num(sx(c.x[i])) << "\" cy=\""
            << svg_detail::num(sy(c.estimate[i])) << "\" r=\"2.2\" fill=\""
            << c.color << "\"/>\n";
      }
    }
  }

  // tick labels
  out << "<text x=\"" << left << "\" y=\"" << height - 18
      << "\" font-family=\"sans-serif\" font-size=\"11\">"
      << svg_detail::num(x_min) << "</text>\n"
      << "<text x=\"" << left + plot_w << "\" y=\"" << height - 18
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
      << svg_detail::num(x_max) << "</text>\n"
      << "<text x=\"" << width / 2 << "\" y=\"" << height - 18
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
      << svg_detail::escape(x_label) << "</text>\n"
      << "<text x=\"" << left - 8 << "\" y=\"" << top + 4
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
      << svg_detail::num(y_max) << "</text>\n"
      << "<text x=\"" << left - 8 << "\" y=\"" << top + plot_h
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
      << svg_detail::num(y_min) << "</text>\n";

  // legend
  double ly = top + 14;
  for (const auto& c : curves) {
    out << "<rect x=\"" << left + plot_w - 150 << "\" y=\"" << ly - 9
        << "\" width=\"12\" height=\"12\" fill=\"" << c.color
        << "\" fill-opacity=\"0.5\"/>\n"
        << "<text x=\"" << left + plot_w - 132 << "\" y=\"" << ly + 1
        << "\" font-family=\"sans-serif\" font-size=\"12\">"
        << svg_detail::escape(c.label) << "</text>\n";
    ly += 18;
  }
  out << "</svg>\n";
  if (!out) throw DataError("IoError: failed writing '" + path + "'");
}

}  // namespace dtreg

#endif  // DTREG_SVG_HPP
