#pragma once

#include <string>
#include <vector>

namespace lof {

struct SvgSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

/// Minimal deterministic line chart: axes, ticks, one polyline per series,
/// legend. No external plotting dependency.
void write_svg_lines(const std::string& path, const std::string& title,
                     const std::string& x_label, const std::string& y_label,
                     const std::vector<SvgSeries>& series,
                     const std::string& config_hash);

}  // namespace lof
