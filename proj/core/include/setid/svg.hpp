#pragma once

#include "setid/linalg.hpp"

#include <string>
#include <vector>

namespace setid {

struct PlotSeries {
  std::string name;
  Vector y;  // plotted against 1..n
  std::string color = "#1f77b4";
  bool dashed = false;
};

// Polyline plot with axis ticks and a zero line. Every series keeps its raw
// values in a data-values attribute so the numbers can be read back.
std::string render_line_plot(const std::string& title, const std::vector<PlotSeries>& series,
                             const std::string& x_label = "t", const std::string& y_label = "");

}  // namespace setid
