#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dyna/harness.hpp"

namespace dyna {

struct PlotSeries {
  std::string label;
  Trace trace;
};

struct PlotOptions {
  bool time_axis = false;  // x is time_s instead of effective epochs
  std::string title = "Suboptimality on the empirical risk";
  bool statistical_line = true;
  double floor = 1e-16;  // values at or below are drawn here
  int width = 760;
  int height = 480;
};

// log10 of max(v, floor).
double clipped_log10(double v, double floor = 1e-16);

// Suboptimality at the first record whose test risk improves on the previous
// record by less than `tolerance`.
std::optional<double> statistical_accuracy(const Trace& trace, double tolerance = 1e-4);

// Multi-series SVG line chart, log-scale suboptimality against epochs or seconds.
std::string render_svg(const std::vector<PlotSeries>& series, const PlotOptions& options = {});

}  // namespace dyna
