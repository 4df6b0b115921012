#ifndef KOLMO_SVG_HPP_
#define KOLMO_SVG_HPP_

// Minimal hand-emitted SVG line charts.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace kolmo {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

struct ChartOptions {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  bool log_y = false;
};

inline std::string render_line_chart(const std::vector<Series>& series, const ChartOptions& opt) {
  constexpr double kW = 640, kH = 400, kLeft = 70, kRight = 20, kTop = 40, kBottom = 50;
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd"};
  auto tx = [&](double v) { return opt.log_x ? std::log10(v) : v; };
  auto ty = [&](double v) { return opt.log_y ? std::log10(v) : v; };
  auto usable = [&](double x, double y) {
    return std::isfinite(tx(x)) && std::isfinite(ty(y)) && (!opt.log_x || x > 0) && (!opt.log_y || y > 0);
  };

  double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
  for (const auto& s : series)
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!usable(s.x[i], s.y[i])) continue;
      x0 = std::min(x0, tx(s.x[i]));
      x1 = std::max(x1, tx(s.x[i]));
      y0 = std::min(y0, ty(s.y[i]));
      y1 = std::max(y1, ty(s.y[i]));
    }
  if (!(x0 <= x1)) x0 = 0, x1 = 1;
  if (!(y0 <= y1)) y0 = 0, y1 = 1;
  if (x1 == x0) x1 = x0 + 1;
  if (y1 == y0) y1 = y0 + 1;
  auto px = [&](double v) { return kLeft + (tx(v) - x0) / (x1 - x0) * (kW - kLeft - kRight); };
  auto py = [&](double v) { return kH - kBottom - (ty(v) - y0) / (y1 - y0) * (kH - kTop - kBottom); };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH << "\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << kW / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << opt.title << "</text>\n"
     << "<line x1=\"" << kLeft << "\" y1=\"" << kH - kBottom << "\" x2=\"" << kW - kRight << "\" y2=\""
     << kH - kBottom << "\" stroke=\"black\"/>\n"
     << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\"" << kH - kBottom
     << "\" stroke=\"black\"/>\n"
     << "<text x=\"" << kW / 2 << "\" y=\"" << kH - 12 << "\" text-anchor=\"middle\" font-size=\"12\">"
     << opt.x_label << (opt.log_x ? " (log10)" : "") << "</text>\n"
     << "<text x=\"16\" y=\"" << kH / 2 << "\" transform=\"rotate(-90 16," << kH / 2
     << ")\" text-anchor=\"middle\" font-size=\"12\">" << opt.y_label << (opt.log_y ? " (log10)" : "")
     << "</text>\n";
  for (int k = 0; k <= 4; ++k) {
    const double fx = x0 + (x1 - x0) * k / 4.0, fy = y0 + (y1 - y0) * k / 4.0;
    const double sx = kLeft + (kW - kLeft - kRight) * k / 4.0, sy = kH - kBottom - (kH - kTop - kBottom) * k / 4.0;
    os << "<text x=\"" << sx << "\" y=\"" << kH - kBottom + 16 << "\" text-anchor=\"middle\" font-size=\"10\">"
       << fx << "</text>\n"
       << "<text x=\"" << kLeft - 6 << "\" y=\"" << sy + 3 << "\" text-anchor=\"end\" font-size=\"10\">" << fy
       << "</text>\n";
  }
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = kColors[s % 5];
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < std::min(series[s].x.size(), series[s].y.size()); ++i)
      if (usable(series[s].x[i], series[s].y[i])) os << px(series[s].x[i]) << ',' << py(series[s].y[i]) << ' ';
    os << "\"/>\n"
       << "<text x=\"" << kW - kRight - 4 << "\" y=\"" << kTop + 14 * (s + 1) << "\" text-anchor=\"end\" fill=\""
       << color << "\" font-size=\"11\">" << series[s].name << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

inline void write_line_chart(const std::string& path, const std::vector<Series>& series, const ChartOptions& opt) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << render_line_chart(series, opt);
}

}  // namespace kolmo

#endif  // KOLMO_SVG_HPP_
