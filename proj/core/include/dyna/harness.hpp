#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dyna/continuation.hpp"
#include "dyna/dataset.hpp"
#include "dyna/lbfgs.hpp"
#include "dyna/newton.hpp"
#include "dyna/objective.hpp"
#include "dyna/saga.hpp"

namespace dyna {

enum class SolverKind { Newton, DynaNewtonV1, DynaNewtonV2, Saga, Lbfgs, DynaLbfgs };

const char* to_string(SolverKind kind) noexcept;
SolverKind solver_from_string(std::string_view name);

struct SyntheticSpec {
  std::size_t n = 2000;
  std::size_t d = 20;
  std::uint64_t seed = 3;
  double margin = 2.0;
};

struct ExperimentConfig {
  // A file path, "synthetic", or a bundled name ("a9a", "w8a"). A missing w8a
  // file falls back to the sparse surrogate.
  std::string dataset = "a9a";
  SyntheticSpec synthetic;
  SparseBinarySpec surrogate;
  double test_fraction = 0.1;
  std::uint64_t split_seed = 1;
  LossKind loss = LossKind::Logistic;
  SolverKind solver = SolverKind::DynaNewtonV2;
  std::optional<double> nu_final;  // 1 / N when unset
  double x0 = 0.0;                 // constant starting vector
  double epoch_budget = 200.0;     // solvers stop once this many epochs are spent
  double target_subopt = 0.0;      // stop early once reached; 0 disables
  bool wall_time = false;          // false writes time_s = 0 so traces are byte-reproducible
  NewtonConfig newton;
  ContinuationConfig continuation;
  LbfgsConfig lbfgs;
  DynaLbfgsConfig dyna_lbfgs;
  SagaConfig saga;
  std::string output_dir = "out";
};

ExperimentConfig parse_config(std::string_view json_text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string config_to_json(const ExperimentConfig& cfg);

struct Problem {
  Dataset train;
  Dataset test;
  LossKind loss = LossKind::Logistic;
  double nu = 0.0;
  std::string source;   // file path or generator description
  bool surrogate = false;
};

// Locates a bundled dataset by name in $DYNA_DATA_DIR, then the source tree's
// data directory. Tries <name>, <name>.gz, <name>.svm(.gz).
std::optional<std::filesystem::path> find_dataset(std::string_view name);
// Real w8a when present, otherwise the synthetic surrogate.
std::pair<Dataset, bool> load_w8a(const SparseBinarySpec& surrogate);
Dataset load_named_or_path(const ExperimentConfig& cfg, std::string* source, bool* surrogate);

Problem prepare_problem(const ExperimentConfig& cfg);

struct ReferenceOptimum {
  double value = 0.0;
  double lambda = 0.0;
  int iterations = 0;
  bool cached = false;
  Vector x;  // empty on cache hits
};

// $DYNA_CACHE_DIR, falling back to <tmp>/dynanewton-cache.
std::filesystem::path cache_dir();

// Full-batch damped Newton from 0 to lambda^2 / 2 <= 1e-14, cached on disk
// by (dataset hash, loss, nu). Throws if the solve does not converge.
ReferenceOptimum reference_optimum(const Dataset& train, LossKind loss, double nu, bool use_cache = true);

struct TraceRecord {
  double epoch = 0.0;
  double time_s = 0.0;
  double train_value = 0.0;
  double subopt = 0.0;
  double test_risk = 0.0;
  std::optional<double> lambda;
  std::optional<int> stage;
};

using Trace = std::vector<TraceRecord>;

std::string trace_to_csv(const Trace& trace);
Trace parse_trace_csv(std::string_view text);
Trace load_trace(const std::filesystem::path& path);

// First epoch at which subopt <= level.
std::optional<double> epochs_to_reach(const Trace& trace, double level);

struct SolverRun {
  Trace trace;
  std::vector<StageRecord> stages;
  Vector x;
  bool converged = false;
  bool budget_exhausted = false;
  bool target_reached = false;
  std::vector<std::string> warnings;
  std::size_t lbfgs_accepted = 0;
  std::size_t lbfgs_skipped = 0;
  double saga_max_drift = 0.0;
};

// Runs the configured solver on a prepared problem; f_ref fixes the
// suboptimality column. Solver failures propagate as exceptions.
SolverRun run_solver(const ExperimentConfig& cfg, const Problem& problem, double f_ref);

std::string stages_to_json(const std::vector<StageRecord>& stages);

// Full pipeline: prepare, reference, solve, write trace.csv / stages.json /
// config.json into cfg.output_dir (diagnostic.json on failure). Returns the
// process exit code: 0 ok, 1 solver failure.
int run_experiment(const ExperimentConfig& cfg);

}  // namespace dyna
