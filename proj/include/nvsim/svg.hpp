#pragma once

#include <string>
#include <vector>

namespace nvsim {

struct SvgSeries {
  std::vector<double> x;
  std::vector<double> y;
  std::string color = "#1f6fb2";
  std::string label;
};

/// Minimal static line plot (axes, ticks, legend) written directly as SVG.
void write_line_plot_svg(const std::string& path, const std::string& title,
                         const std::string& xlabel, const std::string& ylabel,
                         const std::vector<SvgSeries>& series, bool log_x = false);

/// Two-color cell map for sign fields (+1 red, -1 blue, 0 white).
void write_sign_map_svg(const std::string& path, const std::string& title, int nx, int nz,
                        const std::vector<int>& signs);

}  // namespace nvsim
