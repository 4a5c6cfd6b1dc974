#include "dlalign/svgplot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace dlalign {

namespace {

constexpr double kW = 640.0, kH = 420.0;
constexpr double kML = 70.0, kMR = 160.0, kMT = 44.0, kMB = 52.0;

const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                         "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};

std::string fmt(double v) {
  std::ostringstream ss;
  ss << std::setprecision(6) << v;
  return ss.str();
}

struct Range {
  double lo = 0.0, hi = 1.0;
  void expand(double v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void pad() {
    if (hi - lo < 1e-12) {
      lo -= 0.5;
      hi += 0.5;
    } else {
      const double m = 0.06 * (hi - lo);
      lo -= m;
      hi += m;
    }
  }
};

std::vector<double> ticks(const Range& r, int n = 5) {
  std::vector<double> out;
  for (int i = 0; i <= n; ++i)
    out.push_back(r.lo + (r.hi - r.lo) * i / n);
  return out;
}

void axes(std::ostream& os, const Range& xr, const Range& yr,
          const std::string& title, const std::string& xl,
          const std::string& yl) {
  const double x0 = kML, x1 = kW - kMR, y0 = kH - kMB, y1 = kMT;
  os << "<rect x='" << x0 << "' y='" << y1 << "' width='" << x1 - x0
     << "' height='" << y0 - y1
     << "' fill='none' stroke='#333' stroke-width='1'/>\n";
  os << "<text x='" << (x0 + x1) / 2 << "' y='" << kMT - 16
     << "' text-anchor='middle' font-size='15'>" << title << "</text>\n";
  os << "<text x='" << (x0 + x1) / 2 << "' y='" << kH - 12
     << "' text-anchor='middle' font-size='12'>" << xl << "</text>\n";
  os << "<text x='16' y='" << (y0 + y1) / 2
     << "' text-anchor='middle' font-size='12' transform='rotate(-90 16 "
     << (y0 + y1) / 2 << ")'>" << yl << "</text>\n";
  for (double t : ticks(xr)) {
    const double px = x0 + (t - xr.lo) / (xr.hi - xr.lo) * (x1 - x0);
    os << "<line x1='" << px << "' y1='" << y0 << "' x2='" << px << "' y2='"
       << y0 + 4 << "' stroke='#333'/>\n";
    os << "<text x='" << px << "' y='" << y0 + 18
       << "' text-anchor='middle' font-size='10'>" << fmt(t) << "</text>\n";
  }
  for (double t : ticks(yr)) {
    const double py = y0 - (t - yr.lo) / (yr.hi - yr.lo) * (y0 - y1);
    os << "<line x1='" << x0 - 4 << "' y1='" << py << "' x2='" << x0
       << "' y2='" << py << "' stroke='#333'/>\n";
    os << "<text x='" << x0 - 8 << "' y='" << py + 3
       << "' text-anchor='end' font-size='10'>" << fmt(t) << "</text>\n";
  }
}

}  // namespace

void write_line_plot(const std::string& path,
                     const std::vector<PlotSeries>& series,
                     const LinePlotOptions& options) {
  Range xr, yr;
  bool first = true;
  for (const auto& s : series) {
    if (s.x.size() != s.y.size())
      throw std::invalid_argument("series x/y size mismatch: " + s.label);
    for (size_t i = 0; i < s.x.size(); ++i) {
      if (first) {
        xr = {s.x[i], s.x[i]};
        yr = {s.y[i], s.y[i]};
        first = false;
      }
      xr.expand(s.x[i]);
      yr.expand(s.y[i]);
    }
  }
  for (const auto& [_, y] : options.hlines) yr.expand(y);
  xr.pad();
  yr.pad();

  const double x0 = kML, x1 = kW - kMR, y0 = kH - kMB, y1 = kMT;
  auto px = [&](double v) { return x0 + (v - xr.lo) / (xr.hi - xr.lo) * (x1 - x0); };
  auto py = [&](double v) { return y0 - (v - yr.lo) / (yr.hi - yr.lo) * (y0 - y1); };

  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write plot: " + path);
  os << "<svg xmlns='http://www.w3.org/2000/svg' width='" << kW
     << "' height='" << kH << "' font-family='sans-serif'>\n"
     << "<rect width='100%' height='100%' fill='white'/>\n";
  axes(os, xr, yr, options.title, options.x_label, options.y_label);

  int ci = 0;
  double ly = kMT + 12;
  for (const auto& [label, y] : options.hlines) {
    os << "<line x1='" << x0 << "' y1='" << py(y) << "' x2='" << x1
       << "' y2='" << py(y)
       << "' stroke='#555' stroke-width='1.2' stroke-dasharray='6,4'/>\n";
    os << "<line x1='" << x1 + 10 << "' y1='" << ly - 3 << "' x2='" << x1 + 30
       << "' y2='" << ly - 3
       << "' stroke='#555' stroke-width='1.2' stroke-dasharray='6,4'/>\n"
       << "<text x='" << x1 + 34 << "' y='" << ly
       << "' font-size='11'>" << label << "</text>\n";
    ly += 18;
  }
  for (const auto& s : series) {
    const char* color = kColors[ci % 8];
    os << "<polyline fill='none' stroke='" << color
       << "' stroke-width='1.8' points='";
    for (size_t i = 0; i < s.x.size(); ++i)
      os << px(s.x[i]) << "," << py(s.y[i]) << " ";
    os << "'/>\n";
    for (size_t i = 0; i < s.x.size(); ++i)
      os << "<circle cx='" << px(s.x[i]) << "' cy='" << py(s.y[i])
         << "' r='3' fill='" << color << "'/>\n";
    os << "<line x1='" << x1 + 10 << "' y1='" << ly - 3 << "' x2='" << x1 + 30
       << "' y2='" << ly - 3 << "' stroke='" << color
       << "' stroke-width='1.8'/>\n"
       << "<text x='" << x1 + 34 << "' y='" << ly << "' font-size='11'>"
       << s.label << "</text>\n";
    ly += 18;
    ++ci;
  }
  os << "</svg>\n";
}

void write_bar_plot(const std::string& path,
                    const std::vector<std::string>& labels,
                    const std::vector<double>& values,
                    const std::string& title, const std::string& y_label) {
  if (labels.size() != values.size())
    throw std::invalid_argument("bar plot labels/values size mismatch");
  Range yr{0.0, 0.0};
  for (double v : values) yr.expand(v);
  yr.pad();
  yr.lo = std::min(0.0, yr.lo);

  const double x0 = kML, x1 = kW - 40.0, y0 = kH - kMB, y1 = kMT;
  auto py = [&](double v) { return y0 - (v - yr.lo) / (yr.hi - yr.lo) * (y0 - y1); };
  const double n = static_cast<double>(values.size());
  const double slot = (x1 - x0) / std::max(1.0, n);

  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write plot: " + path);
  os << "<svg xmlns='http://www.w3.org/2000/svg' width='" << kW
     << "' height='" << kH << "' font-family='sans-serif'>\n"
     << "<rect width='100%' height='100%' fill='white'/>\n";
  os << "<text x='" << (x0 + x1) / 2 << "' y='" << kMT - 16
     << "' text-anchor='middle' font-size='15'>" << title << "</text>\n";
  os << "<text x='16' y='" << (y0 + y1) / 2
     << "' text-anchor='middle' font-size='12' transform='rotate(-90 16 "
     << (y0 + y1) / 2 << ")'>" << y_label << "</text>\n";
  os << "<line x1='" << x0 << "' y1='" << py(0.0) << "' x2='" << x1
     << "' y2='" << py(0.0) << "' stroke='#333'/>\n";
  for (double t : ticks(yr)) {
    const double p = py(t);
    os << "<line x1='" << x0 - 4 << "' y1='" << p << "' x2='" << x0
       << "' y2='" << p << "' stroke='#333'/>\n"
       << "<text x='" << x0 - 8 << "' y='" << p + 3
       << "' text-anchor='end' font-size='10'>" << fmt(t) << "</text>\n";
  }
  for (size_t i = 0; i < values.size(); ++i) {
    const double cx = x0 + (static_cast<double>(i) + 0.5) * slot;
    const double top = py(std::max(0.0, values[i]));
    const double bot = py(std::min(0.0, values[i]));
    os << "<rect x='" << cx - 0.3 * slot << "' y='" << top << "' width='"
       << 0.6 * slot << "' height='" << std::max(0.5, bot - top)
       << "' fill='" << kColors[0] << "'/>\n"
       << "<text x='" << cx << "' y='" << y0 + 18
       << "' text-anchor='middle' font-size='10'>" << labels[i]
       << "</text>\n";
  }
  os << "</svg>\n";
}

}  // namespace dlalign
