#include "dyna/harness.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "dyna/error.hpp"
#include "json.hpp"

namespace dyna {

using nlohmann::json;

namespace {

constexpr const char* kSolverNames[] = {"newton", "dyna_newton_v1", "dyna_newton_v2",
                                        "saga",   "lbfgs",          "dyna_lbfgs"};

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path.string()));
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot write '{}'", path.string()));
  out << text;
  if (!out) throw IoError(fmt::format("write to '{}' failed", path.string()));
}

// Reads the keys it knows and rejects the rest, so typos do not silently fall
// back to defaults.
class Reader {
 public:
  Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(fmt::format("{}: expected an object", where_));
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(fmt::format("{}.{}: {}", where_, key, e.what()));
    }
  }

  template <class T>
  void get(const char* key, std::optional<T>& out) {
    seen_.insert(key);
    if (!j_.contains(key) || j_.at(key).is_null()) return;
    T value{};
    get(key, value);
    out = value;
  }

  const json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto& [key, _] : j_.items())
      if (!seen_.contains(key)) throw ConfigError(fmt::format("{}: unknown key '{}'", where_, key));
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

template <class T>
json opt(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

}  // namespace

const char* to_string(SolverKind kind) noexcept { return kSolverNames[static_cast<int>(kind)]; }

SolverKind solver_from_string(std::string_view name) {
  for (int i = 0; i < 6; ++i)
    if (name == kSolverNames[i]) return static_cast<SolverKind>(i);
  throw ConfigError(fmt::format("unknown solver '{}'", name));
}

// ---------------------------------------------------------------------------
// config

ExperimentConfig parse_config(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("config is not valid JSON: {}", e.what()));
  }
  ExperimentConfig cfg;
  Reader r(j, "config");
  r.get("dataset", cfg.dataset);
  r.get("test_fraction", cfg.test_fraction);
  r.get("split_seed", cfg.split_seed);
  std::string loss = to_string(cfg.loss);
  r.get("loss", loss);
  try {
    cfg.loss = loss_from_string(loss);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  std::string solver = to_string(cfg.solver);
  r.get("solver", solver);
  cfg.solver = solver_from_string(solver);
  r.get("nu_final", cfg.nu_final);
  r.get("x0", cfg.x0);
  r.get("epoch_budget", cfg.epoch_budget);
  r.get("target_subopt", cfg.target_subopt);
  r.get("wall_time", cfg.wall_time);
  r.get("output_dir", cfg.output_dir);

  if (const json* s = r.child("synthetic")) {
    Reader c(*s, "synthetic");
    c.get("n", cfg.synthetic.n);
    c.get("d", cfg.synthetic.d);
    c.get("seed", cfg.synthetic.seed);
    c.get("margin", cfg.synthetic.margin);
    c.finish();
  }
  if (const json* s = r.child("surrogate")) {
    Reader c(*s, "surrogate");
    c.get("n", cfg.surrogate.n);
    c.get("d", cfg.surrogate.d);
    c.get("mean_nnz", cfg.surrogate.mean_nnz);
    c.get("positive_rate", cfg.surrogate.positive_rate);
    c.get("zipf_exponent", cfg.surrogate.zipf_exponent);
    c.get("flip_rate", cfg.surrogate.flip_rate);
    c.get("seed", cfg.surrogate.seed);
    c.finish();
  }
  if (const json* s = r.child("newton")) {
    Reader c(*s, "newton");
    c.get("ls_alpha", cfg.newton.ls_alpha);
    c.get("ls_beta", cfg.newton.ls_beta);
    c.get("eps", cfg.newton.eps);
    c.get("max_iters", cfg.newton.max_iters);
    c.get("fixed_iters", cfg.newton.fixed_iters);
    c.get("max_halvings", cfg.newton.max_halvings);
    c.finish();
  }
  if (const json* s = r.child("continuation")) {
    Reader c(*s, "continuation");
    auto& k = cfg.continuation;
    c.get("eta", k.eta);
    c.get("beta", k.beta);
    c.get("bound_c", k.bound_c);
    c.get("m0", k.m0);
    c.get("mu0", k.mu0);
    std::string mode = to_string(k.mode);
    c.get("mode", mode);
    if (mode != "v1" && mode != "v2") throw ConfigError(fmt::format("unknown schedule mode '{}'", mode));
    k.mode = mode == "v1" ? ScheduleMode::V1 : ScheduleMode::V2;
    c.get("alpha_grid", k.alpha_grid);
    c.get("fixed_alpha", k.fixed_alpha);
    c.get("exact_residual", k.exact_residual);
    c.get("handover_abort", k.handover_abort);
    c.get("max_stages", k.max_stages);
    c.finish();
  }
  if (const json* s = r.child("lbfgs")) {
    Reader c(*s, "lbfgs");
    c.get("memory", cfg.lbfgs.memory);
    c.get("ls_alpha", cfg.lbfgs.ls_alpha);
    c.get("ls_beta", cfg.lbfgs.ls_beta);
    c.get("grad_tol", cfg.lbfgs.grad_tol);
    c.get("max_iters", cfg.lbfgs.max_iters);
    c.get("max_halvings", cfg.lbfgs.max_halvings);
    c.finish();
  }
  if (const json* s = r.child("dyna_lbfgs")) {
    Reader c(*s, "dyna_lbfgs");
    c.get("stage_iters", cfg.dyna_lbfgs.stage_iters);
    std::string growth = to_string(cfg.dyna_lbfgs.growth);
    c.get("growth", growth);
    try {
      cfg.dyna_lbfgs.growth = growth_test_from_string(growth);
    } catch (const Error& e) {
      throw ConfigError(e.what());
    }
    c.finish();
  }
  if (const json* s = r.child("saga")) {
    Reader c(*s, "saga");
    c.get("epochs", cfg.saga.epochs);
    c.get("seed", cfg.saga.seed);
    c.get("step", cfg.saga.step);
    c.get("check_drift", cfg.saga.check_drift);
    c.finish();
  }
  r.finish();

  if (!(cfg.test_fraction > 0.0 && cfg.test_fraction < 1.0))
    throw ConfigError(fmt::format("test_fraction {} outside (0, 1)", cfg.test_fraction));
  if (cfg.nu_final && !(*cfg.nu_final > 0.0)) throw ConfigError("nu_final must be positive");
  if (!(cfg.epoch_budget > 0.0)) throw ConfigError("epoch_budget must be positive");
  if (!std::isfinite(cfg.x0)) throw ConfigError("x0 must be finite");
  try {
    cfg.newton.validate();
    cfg.continuation.validate();
    cfg.lbfgs.validate();
    cfg.saga.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  ExperimentConfig cfg = parse_config(read_file(path));
  // Relative dataset paths are taken relative to the config file when they exist there.
  const std::filesystem::path data(cfg.dataset);
  if (data.is_relative() && !std::filesystem::exists(data)) {
    const auto beside = path.parent_path() / data;
    if (std::filesystem::exists(beside)) cfg.dataset = beside.string();
  }
  return cfg;
}

std::string config_to_json(const ExperimentConfig& cfg) {
  const auto& k = cfg.continuation;
  json j = {
      {"dataset", cfg.dataset},
      {"synthetic",
       {{"n", cfg.synthetic.n}, {"d", cfg.synthetic.d}, {"seed", cfg.synthetic.seed},
        {"margin", cfg.synthetic.margin}}},
      {"surrogate",
       {{"n", cfg.surrogate.n},
        {"d", cfg.surrogate.d},
        {"mean_nnz", cfg.surrogate.mean_nnz},
        {"positive_rate", cfg.surrogate.positive_rate},
        {"zipf_exponent", cfg.surrogate.zipf_exponent},
        {"flip_rate", cfg.surrogate.flip_rate},
        {"seed", cfg.surrogate.seed}}},
      {"test_fraction", cfg.test_fraction},
      {"split_seed", cfg.split_seed},
      {"loss", to_string(cfg.loss)},
      {"solver", to_string(cfg.solver)},
      {"nu_final", opt(cfg.nu_final)},
      {"x0", cfg.x0},
      {"epoch_budget", cfg.epoch_budget},
      {"target_subopt", cfg.target_subopt},
      {"wall_time", cfg.wall_time},
      {"newton",
       {{"ls_alpha", cfg.newton.ls_alpha},
        {"ls_beta", cfg.newton.ls_beta},
        {"eps", cfg.newton.eps},
        {"max_iters", cfg.newton.max_iters},
        {"fixed_iters", opt(cfg.newton.fixed_iters)},
        {"max_halvings", cfg.newton.max_halvings}}},
      {"continuation",
       {{"eta", k.eta},
        {"beta", k.beta},
        {"bound_c", k.bound_c},
        {"m0", k.m0},
        {"mu0", k.mu0},
        {"mode", to_string(k.mode)},
        {"alpha_grid", k.alpha_grid},
        {"fixed_alpha", opt(k.fixed_alpha)},
        {"exact_residual", k.exact_residual},
        {"handover_abort", k.handover_abort},
        {"max_stages", k.max_stages}}},
      {"lbfgs",
       {{"memory", cfg.lbfgs.memory},
        {"ls_alpha", cfg.lbfgs.ls_alpha},
        {"ls_beta", cfg.lbfgs.ls_beta},
        {"grad_tol", cfg.lbfgs.grad_tol},
        {"max_iters", cfg.lbfgs.max_iters},
        {"max_halvings", cfg.lbfgs.max_halvings}}},
      {"dyna_lbfgs",
       {{"stage_iters", cfg.dyna_lbfgs.stage_iters}, {"growth", to_string(cfg.dyna_lbfgs.growth)}}},
      {"saga",
       {{"epochs", cfg.saga.epochs},
        {"seed", cfg.saga.seed},
        {"step", opt(cfg.saga.step)},
        {"check_drift", cfg.saga.check_drift}}},
      {"output_dir", cfg.output_dir},
  };
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// data

std::optional<std::filesystem::path> find_dataset(std::string_view name) {
  std::vector<std::filesystem::path> dirs;
  if (const char* env = std::getenv("DYNA_DATA_DIR"); env != nullptr && *env != '\0') dirs.emplace_back(env);
  dirs.emplace_back(DYNA_SOURCE_DATA_DIR);
  const std::string base(name);
  for (const auto& dir : dirs) {
    for (const char* suffix : {"", ".gz", ".svm", ".svm.gz"}) {
      const auto candidate = dir / (base + suffix);
      if (std::filesystem::is_regular_file(candidate)) return candidate;
    }
  }
  return std::nullopt;
}

std::pair<Dataset, bool> load_w8a(const SparseBinarySpec& surrogate) {
  if (auto path = find_dataset("w8a")) return {load_svmlight(*path), false};
  return {synthesize_sparse_binary(surrogate), true};
}

Dataset load_named_or_path(const ExperimentConfig& cfg, std::string* source, bool* surrogate) {
  auto note = [&](std::string s, bool sur) {
    if (source != nullptr) *source = std::move(s);
    if (surrogate != nullptr) *surrogate = sur;
  };
  if (cfg.dataset == "synthetic") {
    const auto& s = cfg.synthetic;
    note(fmt::format("synthetic logistic n={} d={} seed={} margin={}", s.n, s.d, s.seed, s.margin), false);
    return synthesize_logistic(s.n, s.d, s.seed, s.margin);
  }
  const std::filesystem::path path(cfg.dataset);
  if (std::filesystem::exists(path)) {
    note(path.string(), false);
    return load_svmlight(path);
  }
  if (!cfg.dataset.empty() && cfg.dataset.find('/') == std::string::npos) {
    if (auto found = find_dataset(cfg.dataset)) {
      note(found->string(), false);
      return load_svmlight(*found);
    }
    if (cfg.dataset == "w8a") {
      note(fmt::format("w8a surrogate (sparse binary, seed {})", cfg.surrogate.seed), true);
      return synthesize_sparse_binary(cfg.surrogate);
    }
  }
  throw IoError(fmt::format("dataset '{}' not found", cfg.dataset));
}

Problem prepare_problem(const ExperimentConfig& cfg) {
  Problem p;
  Dataset all = load_named_or_path(cfg, &p.source, &p.surrogate);
  if (cfg.loss == LossKind::Logistic && all.label_kind() != LabelKind::Binary)
    throw ConfigError("logistic loss needs binary labels");
  auto [train, test] = train_test_split(all, cfg.test_fraction, cfg.split_seed);
  p.train = std::move(train);
  p.test = std::move(test);
  p.loss = cfg.loss;
  p.nu = cfg.nu_final.value_or(1.0 / static_cast<double>(p.train.size()));
  return p;
}

// ---------------------------------------------------------------------------
// reference optimum

std::filesystem::path cache_dir() {
  if (const char* env = std::getenv("DYNA_CACHE_DIR"); env != nullptr && *env != '\0') return env;
  return std::filesystem::temp_directory_path() / "dynanewton-cache";
}

ReferenceOptimum reference_optimum(const Dataset& train, LossKind loss, double nu, bool use_cache) {
  const std::uint64_t hash = train.content_hash();
  const auto file = cache_dir() / fmt::format("ref-{:016x}-{}-{:a}.json", hash, to_string(loss), nu);
  if (use_cache && std::filesystem::exists(file)) {
    try {
      const json j = json::parse(read_file(file));
      if (j.at("hash").get<std::uint64_t>() == hash && j.at("nu").get<double>() == nu) {
        ReferenceOptimum r;
        r.value = j.at("value").get<double>();
        r.lambda = j.at("lambda").get<double>();
        r.iterations = j.at("iterations").get<int>();
        r.cached = true;
        return r;
      }
    } catch (const std::exception&) {
      // unreadable entry: recompute and overwrite
    }
  }

  const RegularizedObjective obj(loss, prefix(train, train.size()), nu);
  NewtonConfig cfg;
  cfg.eps = 1e-14;
  cfg.max_iters = 200;
  NewtonResult res = minimize(obj, Vector::Zero(static_cast<Eigen::Index>(train.dim())), cfg);
  if (!res.converged)
    throw Error(fmt::format("reference solve did not converge (decrement {:.3g} after {} iterations)",
                            res.final_lambda, res.iterations));
  ReferenceOptimum r;
  r.value = res.final_direction->eval.value;
  r.lambda = res.final_lambda;
  r.iterations = res.iterations;
  r.x = res.point.x;

  if (use_cache) {
    std::error_code ec;
    std::filesystem::create_directories(cache_dir(), ec);
    if (!ec) {
      const json j = {{"hash", hash}, {"nu", nu}, {"loss", to_string(loss)},
                      {"value", r.value}, {"lambda", r.lambda}, {"iterations", r.iterations}};
      // A second process may race us here; both write the same value.
      const auto tmp = file.string() + fmt::format(".{}", std::chrono::steady_clock::now().time_since_epoch().count());
      try {
        write_file(tmp, j.dump(2));
        std::filesystem::rename(tmp, file);
      } catch (const std::exception&) {
        std::filesystem::remove(tmp, ec);
      }
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// traces

std::string trace_to_csv(const Trace& trace) {
  std::string out = "epoch,time_s,train_value,subopt,test_risk,lambda,stage\n";
  for (const auto& r : trace) {
    out += fmt::format("{:.17g},{:.6f},{:.17g},{:.17g},{:.17g},", r.epoch, r.time_s, r.train_value, r.subopt,
                       r.test_risk);
    if (r.lambda) out += fmt::format("{:.17g}", *r.lambda);
    out += ',';
    if (r.stage) out += fmt::format("{}", *r.stage);
    out += '\n';
  }
  return out;
}

Trace parse_trace_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || line.rfind("epoch,time_s,train_value,subopt,test_risk", 0) != 0)
    throw ParseError(1, "missing trace header");
  Trace out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    if (cells.size() != 7) throw ParseError(lineno, fmt::format("expected 7 fields, got {}", cells.size()));
    try {
      TraceRecord r;
      r.epoch = std::stod(cells[0]);
      r.time_s = std::stod(cells[1]);
      r.train_value = std::stod(cells[2]);
      r.subopt = std::stod(cells[3]);
      r.test_risk = std::stod(cells[4]);
      if (!cells[5].empty()) r.lambda = std::stod(cells[5]);
      if (!cells[6].empty()) r.stage = std::stoi(cells[6]);
      out.push_back(r);
    } catch (const std::logic_error&) {
      throw ParseError(lineno, "malformed number");
    }
  }
  return out;
}

Trace load_trace(const std::filesystem::path& path) { return parse_trace_csv(read_file(path)); }

std::optional<double> epochs_to_reach(const Trace& trace, double level) {
  for (const auto& r : trace)
    if (r.subopt <= level) return r.epoch;
  return std::nullopt;
}

std::string stages_to_json(const std::vector<StageRecord>& stages) {
  json arr = json::array();
  for (const auto& s : stages) {
    arr.push_back({{"t", s.t},
                   {"m", s.m},
                   {"mu", s.mu},
                   {"alpha", s.alpha},
                   {"lambda_handover", s.lambda_handover},
                   {"lambda_estimate", opt(s.lambda_estimate)},
                   {"epochs_used", s.epochs_used},
                   {"newton_steps", s.newton_steps},
                   {"fallback", s.fallback}});
  }
  return arr.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// solving

SolverRun run_solver(const ExperimentConfig& cfg, const Problem& problem, double f_ref) {
  const Dataset& train = problem.train;
  const std::size_t total = train.size();
  const RegularizedObjective full(problem.loss, prefix(train, total), problem.nu);
  const Vector x0 = Vector::Constant(static_cast<Eigen::Index>(train.dim()), cfg.x0);
  const Dataset test = problem.test.dim() < train.dim() ? problem.test.with_dim(train.dim()) : problem.test;
  if (test.dim() > train.dim()) throw ConfigError("test set has features the training set lacks");

  SolverRun out;
  EpochMeter meter(total);
  using clock = std::chrono::steady_clock;
  double solver_seconds = 0.0;
  auto started = clock::now();

  auto record = [&](const Vector& x, double epochs, std::optional<double> lambda, std::optional<int> stage) {
    TraceRecord r;
    r.epoch = epochs;
    r.time_s = cfg.wall_time ? solver_seconds : 0.0;
    r.train_value = full.value(x);
    r.subopt = r.train_value - f_ref;
    r.test_risk = average_loss(problem.loss, test, x);
    r.lambda = lambda;
    r.stage = stage;
    out.trace.push_back(r);
  };

  // Time spent in the observer (trace bookkeeping) is excluded from time_s.
  const IterateObserver observer = [&](const IterateInfo& info) {
    solver_seconds += std::chrono::duration<double>(clock::now() - started).count();
    record(info.x, info.epochs, info.lambda, info.stage);
    if (cfg.target_subopt > 0.0 && out.trace.back().subopt <= cfg.target_subopt) {
      out.target_reached = true;
      return false;
    }
    if (info.epochs >= cfg.epoch_budget) {
      out.budget_exhausted = true;
      return false;
    }
    started = clock::now();
    return true;
  };

  record(x0, 0.0, std::nullopt, std::nullopt);
  started = clock::now();
  const ContinuationConfig cont = cfg.continuation.resolved(total, train.dim(), problem.nu);
  switch (cfg.solver) {
    case SolverKind::Newton: {
      NewtonResult r = minimize(full, x0, cfg.newton, &meter, observer);
      out.converged = r.converged;
      out.x = std::move(r.point.x);
      break;
    }
    case SolverKind::DynaNewtonV1:
    case SolverKind::DynaNewtonV2: {
      ContinuationConfig c = cont;
      c.mode = cfg.solver == SolverKind::DynaNewtonV1 ? ScheduleMode::V1 : ScheduleMode::V2;
      ContinuationResult r = dyna_newton(train, problem.loss, c, cfg.newton, x0, &meter, observer);
      out.converged = r.converged;
      out.stages = std::move(r.stages);
      out.warnings = std::move(r.warnings);
      out.x = std::move(r.x);
      break;
    }
    case SolverKind::Saga: {
      SagaConfig s = cfg.saga;
      s.epochs = std::min<int>(s.epochs, static_cast<int>(std::ceil(cfg.epoch_budget)));
      SagaResult r = saga_run(full, x0, s, &meter, observer);
      out.converged = true;
      out.saga_max_drift = r.max_drift;
      out.x = std::move(r.state.x);
      break;
    }
    case SolverKind::Lbfgs: {
      LbfgsResult r = lbfgs_minimize(full, x0, cfg.lbfgs, &meter, observer);
      out.converged = r.converged;
      if (r.stalled) out.warnings.push_back("line search stalled");
      out.lbfgs_accepted = r.accepted_pairs;
      out.lbfgs_skipped = r.skipped_pairs;
      out.x = std::move(r.x);
      break;
    }
    case SolverKind::DynaLbfgs: {
      DynaLbfgsResult r = dyna_lbfgs(train, problem.loss, cont, cfg.lbfgs, cfg.dyna_lbfgs, x0, &meter, observer);
      out.converged = r.continuation.converged;
      out.stages = std::move(r.continuation.stages);
      out.warnings = std::move(r.continuation.warnings);
      out.lbfgs_accepted = r.accepted_pairs;
      out.lbfgs_skipped = r.skipped_pairs;
      out.x = std::move(r.continuation.x);
      break;
    }
  }
  if (out.target_reached) out.converged = true;
  return out;
}

int run_experiment(const ExperimentConfig& cfg_in) {
  ExperimentConfig cfg = cfg_in;
  const std::filesystem::path dir(cfg.output_dir);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError(fmt::format("cannot create '{}': {}", dir.string(), ec.message()));

  const Problem problem = prepare_problem(cfg);
  cfg.nu_final = problem.nu;
  cfg.continuation = cfg.continuation.resolved(problem.train.size(), problem.train.dim(), problem.nu);
  write_file(dir / "config.json", config_to_json(cfg));

  auto diagnose = [&](const std::string& kind, const std::string& message, json extra) {
    extra["error"] = kind;
    extra["message"] = message;
    extra["solver"] = to_string(cfg.solver);
    extra["dataset"] = problem.source;
    write_file(dir / "diagnostic.json", extra.dump(2) + "\n");
    return 1;
  };

  double f_ref = 0.0;
  try {
    f_ref = reference_optimum(problem.train, problem.loss, problem.nu).value;
  } catch (const IoError&) {
    throw;
  } catch (const Error& e) {
    return diagnose("reference", e.what(), json::object());
  }

  SolverRun run;
  try {
    run = run_solver(cfg, problem, f_ref);
  } catch (const HandoverViolation& e) {
    return diagnose("handover_violation", e.what(),
                    {{"stage", e.stage()}, {"lambda", e.lambda()}, {"eta", e.eta()},
                     {"limit", cfg.continuation.handover_abort * e.eta()}});
  } catch (const StalledStepError& e) {
    return diagnose("stalled_step", e.what(), json::object());
  } catch (const SingularHessianError& e) {
    return diagnose("singular_hessian", e.what(), json::object());
  }

  write_file(dir / "trace.csv", trace_to_csv(run.trace));
  write_file(dir / "stages.json", stages_to_json(run.stages));
  if (!run.converged) {
    return diagnose(run.budget_exhausted ? "budget_exhausted" : "not_converged",
                    "solver stopped before reaching its tolerance",
                    {{"epochs", run.trace.back().epoch}, {"subopt", run.trace.back().subopt},
                     {"warnings", run.warnings}});
  }
  return 0;
}

}  // namespace dyna
