#include "nvsim/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace nvsim {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

/// round a raw step up to 1/2/5 * 10^k
double nice_step(double span) {
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double r = raw / mag;
  double step = 10.0;
  if (r <= 1.0) step = 1.0;
  else if (r <= 2.0) step = 2.0;
  else if (r <= 5.0) step = 5.0;
  return step * mag;
}

std::vector<double> ticks_for(double lo, double hi) {
  std::vector<double> t;
  if (!(hi > lo)) {
    t.push_back(lo);
    return t;
  }
  const double step = nice_step(hi - lo);
  double v = std::ceil(lo / step) * step;
  for (; v <= hi + 1e-12 * step; v += step) t.push_back(v);
  return t;
}

void atomic_write(const std::string& path, const std::string& body) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw std::runtime_error("cannot write: " + tmp);
    out << body;
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace

void write_line_plot_svg(const std::string& path, const std::string& title,
                         const std::string& xlabel, const std::string& ylabel,
                         const std::vector<SvgSeries>& series, bool log_x) {
  const int w = 820, h = 520;
  const int ml = 80, mr = 25, mt = 45, mb = 60;
  const double pw = w - ml - mr, ph = h - mt - mb;

  double x_lo = std::numeric_limits<double>::infinity(), x_hi = -x_lo;
  double y_lo = x_lo, y_hi = -x_lo;
  for (const auto& s : series) {
    for (double v : s.x) {
      const double u = log_x ? std::log10(v) : v;
      x_lo = std::min(x_lo, u);
      x_hi = std::max(x_hi, u);
    }
    for (double v : s.y) {
      y_lo = std::min(y_lo, v);
      y_hi = std::max(y_hi, v);
    }
  }
  if (!(x_hi > x_lo)) x_hi = x_lo + 1;
  if (!(y_hi > y_lo)) y_hi = y_lo + 1;
  const double y_pad = 0.05 * (y_hi - y_lo);
  y_lo -= y_pad;
  y_hi += y_pad;

  auto px = [&](double x) {
    const double u = log_x ? std::log10(x) : x;
    return ml + (u - x_lo) / (x_hi - x_lo) * pw;
  };
  auto py = [&](double y) { return mt + (1.0 - (y - y_lo) / (y_hi - y_lo)) * ph; };

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(w) +
         "\" height=\"" + std::to_string(h) + "\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg += "<text x=\"" + std::to_string(w / 2) + "\" y=\"25\" text-anchor=\"middle\" "
         "font-family=\"sans-serif\" font-size=\"16\">" + title + "</text>\n";

  // frame
  svg += "<rect x=\"" + std::to_string(ml) + "\" y=\"" + std::to_string(mt) + "\" width=\"" +
         fmt(pw) + "\" height=\"" + fmt(ph) + "\" fill=\"none\" stroke=\"black\"/>\n";

  for (double t : ticks_for(x_lo, x_hi)) {
    const double x = ml + (t - x_lo) / (x_hi - x_lo) * pw;
    svg += "<line x1=\"" + fmt(x) + "\" y1=\"" + fmt(mt + ph) + "\" x2=\"" + fmt(x) + "\" y2=\"" +
           fmt(mt + ph + 5) + "\" stroke=\"black\"/>\n";
    const std::string lbl = log_x ? ("1e" + fmt(t)) : fmt(t);
    svg += "<text x=\"" + fmt(x) + "\" y=\"" + fmt(mt + ph + 20) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" + lbl +
           "</text>\n";
  }
  for (double t : ticks_for(y_lo, y_hi)) {
    const double y = py(t);
    svg += "<line x1=\"" + fmt(ml - 5) + "\" y1=\"" + fmt(y) + "\" x2=\"" + std::to_string(ml) +
           "\" y2=\"" + fmt(y) + "\" stroke=\"black\"/>\n";
    svg += "<text x=\"" + fmt(ml - 8) + "\" y=\"" + fmt(y + 4) +
           "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" + fmt(t) +
           "</text>\n";
  }
  svg += "<text x=\"" + std::to_string(ml + static_cast<int>(pw) / 2) + "\" y=\"" +
         std::to_string(h - 15) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" + xlabel +
         "</text>\n";
  svg += "<text x=\"20\" y=\"" + std::to_string(mt + static_cast<int>(ph) / 2) +
         "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
         "transform=\"rotate(-90 20 " + std::to_string(mt + static_cast<int>(ph) / 2) + ")\">" +
         ylabel + "</text>\n";

  int li = 0;
  for (const auto& s : series) {
    std::string pts;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      pts += fmt(px(s.x[i])) + "," + fmt(py(s.y[i])) + " ";
    }
    svg += "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" + s.color +
           "\" stroke-width=\"1.5\"/>\n";
    if (!s.label.empty()) {
      const int y = mt + 18 + 16 * li++;
      svg += "<line x1=\"" + std::to_string(ml + 10) + "\" y1=\"" + std::to_string(y - 4) +
             "\" x2=\"" + std::to_string(ml + 35) + "\" y2=\"" + std::to_string(y - 4) +
             "\" stroke=\"" + s.color + "\" stroke-width=\"2\"/>\n";
      svg += "<text x=\"" + std::to_string(ml + 40) + "\" y=\"" + std::to_string(y) +
             "\" font-family=\"sans-serif\" font-size=\"12\">" + s.label + "</text>\n";
    }
  }
  svg += "</svg>\n";
  atomic_write(path, svg);
}

void write_sign_map_svg(const std::string& path, const std::string& title, int nx, int nz,
                        const std::vector<int>& signs) {
  const int cell = std::max(2, 600 / std::max(nx, 1));
  const int w = nx * cell + 40, h = nz * cell + 70;
  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(w) +
         "\" height=\"" + std::to_string(h) + "\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg += "<text x=\"" + std::to_string(w / 2) + "\" y=\"22\" text-anchor=\"middle\" "
         "font-family=\"sans-serif\" font-size=\"15\">" + title + "</text>\n";
  for (int j = 0; j < nz; ++j) {
    for (int i = 0; i < nx; ++i) {
      const int s = signs[static_cast<std::size_t>(j) * nx + i];
      const char* color = s > 0 ? "#d64541" : (s < 0 ? "#2e6db4" : "#ffffff");
      // z increases upward: row j drawn from the bottom
      const int y = 40 + (nz - 1 - j) * cell;
      svg += "<rect x=\"" + std::to_string(20 + i * cell) + "\" y=\"" + std::to_string(y) +
             "\" width=\"" + std::to_string(cell) + "\" height=\"" + std::to_string(cell) +
             "\" fill=\"" + color + "\"/>\n";
    }
  }
  svg += "</svg>\n";
  atomic_write(path, svg);
}

}  // namespace nvsim
