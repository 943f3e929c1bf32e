#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "dyna/checks.hpp"
#include "dyna/error.hpp"
#include "dyna/harness.hpp"
#include "dyna/plot.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kSolverFailure = 1;
constexpr int kUsage = 2;

int cmd_run(const std::string& config_path, const std::string& out_dir) {
  dyna::ExperimentConfig cfg = dyna::load_config(config_path);
  if (!out_dir.empty()) cfg.output_dir = out_dir;
  const int code = dyna::run_experiment(cfg);
  if (code == kOk) {
    fmt::print("wrote {}/trace.csv\n", cfg.output_dir);
  } else {
    fmt::print(stderr, "solver failed; see {}/diagnostic.json\n", cfg.output_dir);
  }
  return code;
}

int cmd_plot(const std::string& out, const std::vector<std::string>& traces, bool time_axis, bool no_stat) {
  std::vector<dyna::PlotSeries> series;
  for (const auto& file : traces) {
    const std::filesystem::path p(file);
    std::string label = p.parent_path().filename().string();
    if (label.empty() || label == ".") label = p.stem().string();
    series.push_back({label, dyna::load_trace(p)});
  }
  dyna::PlotOptions opt;
  opt.time_axis = time_axis;
  opt.statistical_line = !no_stat;
  const std::string svg = dyna::render_svg(series, opt);
  std::ofstream f(out, std::ios::binary);
  if (!f) throw dyna::IoError(fmt::format("cannot write '{}'", out));
  f << svg;
  return kOk;
}

int cmd_check(unsigned long long seed) {
  int failed = 0;
  for (const auto& c : dyna::run_property_checks(seed)) {
    fmt::print("{} {} ({})\n", c.passed ? "PASS" : "FAIL", c.name, c.detail);
    failed += c.passed ? 0 : 1;
  }
  return failed == 0 ? kOk : kSolverFailure;
}

int cmd_reference(const std::string& dataset, double nu, const std::string& loss, bool no_cache) {
  dyna::ExperimentConfig cfg;
  cfg.dataset = dataset;
  std::string source;
  const dyna::Dataset data = dyna::load_named_or_path(cfg, &source, nullptr);
  const dyna::ReferenceOptimum r = dyna::reference_optimum(data, dyna::loss_from_string(loss), nu, !no_cache);
  fmt::print("{:.17g}\n", r.value);
  fmt::print(stderr, "{} rows from {}; decrement {:.3g}; {}\n", data.size(), source, r.lambda,
             r.cached ? "cached" : fmt::format("{} Newton iterations", r.iterations));
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Continuation Newton solver for regularized empirical risk minimization"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  auto* run = app.add_subcommand("run", "Run one experiment described by a JSON config");
  run->add_option("--config", config_path, "Experiment config (JSON)")->required();
  run->add_option("--out", out_dir, "Override the config's output directory");

  std::string svg_out;
  std::vector<std::string> traces;
  bool time_axis = false, no_stat = false;
  auto* plot = app.add_subcommand("plot", "Render trace.csv files as an SVG convergence chart");
  plot->add_option("--out", svg_out, "Output SVG")->required();
  plot->add_option("traces", traces, "trace.csv files")->required();
  plot->add_flag("--time", time_axis, "Use wall time on the x axis");
  plot->add_flag("--no-stat-line", no_stat, "Omit the statistical-accuracy line");

  unsigned long long seed = 1;
  auto* check = app.add_subcommand("check", "Run the invariant and property checks");
  check->add_option("--seed", seed, "Random seed");

  std::string dataset, loss = "logistic";
  double nu = 0.0;
  bool no_cache = false;
  auto* reference = app.add_subcommand("reference", "Compute the reference optimum of a dataset");
  reference->add_option("--dataset", dataset, "svmlight file or bundled name")->required();
  reference->add_option("--nu", nu, "Regularization strength")->required()->check(CLI::PositiveNumber);
  reference->add_option("--loss", loss, "logistic or quadratic");
  reference->add_flag("--no-cache", no_cache, "Ignore and do not write the cache");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*run) return cmd_run(config_path, out_dir);
    if (*plot) return cmd_plot(svg_out, traces, time_axis, no_stat);
    if (*check) return cmd_check(seed);
    if (*reference) return cmd_reference(dataset, nu, loss, no_cache);
  } catch (const dyna::IoError& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kUsage;
  } catch (const dyna::ConfigError& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return kUsage;
  } catch (const dyna::ParseError& e) {
    fmt::print(stderr, "parse error: {}\n", e.what());
    return kUsage;
  } catch (const dyna::Error& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kSolverFailure;
  }
  return kUsage;
}
