#include "dyna/plot.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "dyna/error.hpp"

namespace dyna {

namespace {

constexpr const char* kPalette[] = {"#d62728", "#1f77b4", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#000000"};

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

double clipped_log10(double v, double floor) {
  return std::log10(std::isfinite(v) && v > floor ? v : floor);
}

std::optional<double> statistical_accuracy(const Trace& trace, double tolerance) {
  for (std::size_t i = 1; i < trace.size(); ++i)
    if (trace[i - 1].test_risk - trace[i].test_risk < tolerance) return trace[i].subopt;
  return std::nullopt;
}

std::string render_svg(const std::vector<PlotSeries>& series, const PlotOptions& opt) {
  if (series.empty()) throw Error("nothing to plot");
  for (const auto& s : series)
    if (s.trace.empty()) throw Error(fmt::format("series '{}' has an empty trace", s.label));

  auto xof = [&](const TraceRecord& r) { return opt.time_axis ? r.time_s : r.epoch; };
  double xmax = 0.0;
  double ymin = 0.0;
  double ymax = -1e300;
  for (const auto& s : series) {
    for (const auto& r : s.trace) {
      xmax = std::max(xmax, xof(r));
      const double y = clipped_log10(r.subopt, opt.floor);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  }
  if (xmax <= 0.0) xmax = 1.0;
  ymin = std::floor(ymin);
  ymax = std::ceil(ymax);
  if (ymax <= ymin) ymax = ymin + 1.0;

  const double left = 70.0, right = 170.0, top = 40.0, bottom = 50.0;
  const double pw = opt.width - left - right;
  const double ph = opt.height - top - bottom;
  auto px = [&](double x) { return left + pw * x / xmax; };
  auto py = [&](double y) { return top + ph * (ymax - y) / (ymax - ymin); };

  std::string svg = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" font-family=\"sans-serif\" "
      "font-size=\"12\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
      opt.width, opt.height);
  svg += fmt::format("<text x=\"{:.1f}\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
                     left + pw / 2, escape(opt.title));
  svg += fmt::format(
      "<rect x=\"{:.1f}\" y=\"{:.1f}\" width=\"{:.1f}\" height=\"{:.1f}\" fill=\"none\" stroke=\"#333\"/>\n", left,
      top, pw, ph);

  // y ticks at every power of ten (thinned when the range is large)
  const int span = static_cast<int>(ymax - ymin);
  const int ystep = std::max(1, span / 8);
  for (int e = static_cast<int>(ymin); e <= static_cast<int>(ymax); e += ystep) {
    const double y = py(e);
    svg += fmt::format("<line x1=\"{:.1f}\" y1=\"{:.1f}\" x2=\"{:.1f}\" y2=\"{:.1f}\" stroke=\"#ddd\"/>\n", left, y,
                       left + pw, y);
    svg += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"end\">1e{}</text>\n", left - 6, y + 4, e);
  }
  const double xstep = std::pow(10.0, std::floor(std::log10(xmax))) * (xmax / std::pow(10.0, std::floor(std::log10(xmax))) > 5 ? 2.0 : 1.0);
  for (double x = 0.0; x <= xmax * (1 + 1e-9); x += xstep) {
    svg += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\">{:g}</text>\n", px(x),
                       top + ph + 18, x);
  }
  svg += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\">{}</text>\n", left + pw / 2,
                     top + ph + 40, opt.time_axis ? "time (s)" : "effective epochs");
  svg += fmt::format(
      "<text transform=\"translate(18,{:.1f}) rotate(-90)\" text-anchor=\"middle\">suboptimality</text>\n",
      top + ph / 2);

  for (std::size_t k = 0; k < series.size(); ++k) {
    const char* color = kPalette[k % std::size(kPalette)];
    std::string points;
    for (const auto& r : series[k].trace)
      points += fmt::format("{:.2f},{:.2f} ", px(xof(r)), py(clipped_log10(r.subopt, opt.floor)));
    svg += fmt::format("<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"2\" points=\"{}\"/>\n", color, points);
    const double ly = top + 16.0 + 18.0 * static_cast<double>(k);
    svg += fmt::format("<line x1=\"{:.1f}\" y1=\"{:.1f}\" x2=\"{:.1f}\" y2=\"{:.1f}\" stroke=\"{}\" stroke-width=\"2\"/>\n",
                       left + pw + 12, ly, left + pw + 36, ly, color);
    svg += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\">{}</text>\n", left + pw + 42, ly + 4,
                       escape(series[k].label));
  }

  if (opt.statistical_line) {
    std::optional<double> level;
    for (const auto& s : series)
      if ((level = statistical_accuracy(s.trace))) break;
    if (level) {
      const double y = py(clipped_log10(*level, opt.floor));
      svg += fmt::format(
          "<line x1=\"{:.1f}\" y1=\"{:.1f}\" x2=\"{:.1f}\" y2=\"{:.1f}\" stroke=\"#555\" stroke-dasharray=\"2,4\"/>\n",
          left, y, left + pw, y);
    }
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace dyna
