#include "dyna/lbfgs.hpp"

#include <cmath>
#include <vector>

#include <fmt/format.h>

#include "dyna/error.hpp"

namespace dyna {

LbfgsMemory::LbfgsMemory(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw Error("L-BFGS memory needs capacity >= 1");
}

bool LbfgsMemory::push(const Vector& s, const Vector& y) {
  const double sy = s.dot(y);
  if (!(sy > 1e-12 * s.norm() * y.norm())) {
    ++skipped_;
    return false;
  }
  if (pairs_.size() == capacity_) pairs_.pop_front();
  pairs_.emplace_back(s, y);
  ++accepted_;
  return true;
}

void LbfgsMemory::clear() { pairs_.clear(); }

double LbfgsMemory::gamma() const noexcept {
  if (pairs_.empty()) return 1.0;
  const auto& [s, y] = pairs_.back();
  return s.dot(y) / y.squaredNorm();
}

Vector two_loop_direction(const LbfgsMemory& memory, const Vector& g) {
  const auto& pairs = memory.pairs();
  std::vector<double> a(pairs.size());
  std::vector<double> rho(pairs.size());
  Vector q = g;
  for (std::size_t k = pairs.size(); k-- > 0;) {
    const auto& [s, y] = pairs[k];
    rho[k] = 1.0 / s.dot(y);
    a[k] = rho[k] * s.dot(q);
    q -= a[k] * y;
  }
  Vector r = memory.gamma() * q;
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto& [s, y] = pairs[k];
    const double b = rho[k] * y.dot(r);
    r += (a[k] - b) * s;
  }
  return -r;
}

const char* to_string(GrowthTest test) noexcept {
  return test == GrowthTest::GradientNorm ? "gradient_norm" : "quasi_newton";
}

GrowthTest growth_test_from_string(std::string_view name) {
  if (name == "gradient_norm") return GrowthTest::GradientNorm;
  if (name == "quasi_newton") return GrowthTest::QuasiNewton;
  throw Error(fmt::format("unknown growth test '{}'", name));
}

void LbfgsConfig::validate() const {
  if (memory == 0) throw Error("L-BFGS memory must be positive");
  if (!(ls_alpha > 0.0 && ls_alpha < 0.5)) throw Error(fmt::format("ls_alpha {} outside (0, 1/2)", ls_alpha));
  if (!(ls_beta > 0.0 && ls_beta < 1.0)) throw Error(fmt::format("ls_beta {} outside (0, 1)", ls_beta));
  if (!(grad_tol >= 0.0)) throw Error("grad_tol must be non-negative");
  if (max_iters < 0) throw Error("max_iters must be non-negative");
  if (max_halvings < 1) throw Error("max_halvings must be positive");
}

namespace {

struct GradPoint {
  Vector x;
  RowSums sums;  // value and gradient only
  EvalReport eval;
};

GradPoint grad_point(const RegularizedObjective& obj, Vector x, RowSums sums) {
  EvalReport eval = obj.finalize(sums, x);
  return {std::move(x), std::move(sums), std::move(eval)};
}

GradPoint evaluate_grad(const RegularizedObjective& obj, const Vector& x, CostKind kind, EpochMeter* meter) {
  RowSums sums = obj.sums(x, false);
  charge(meter, kind, obj.size());
  return grad_point(obj, x, std::move(sums));
}

struct RunOutcome {
  int iterations = 0;
  bool converged = false;
  bool stalled = false;
  bool stopped = false;
};

// Quasi-Newton iterations on `obj` from `at` until |grad| <= tol or the budget
// runs out; `at` and `memory` are updated in place.
RunOutcome run(const RegularizedObjective& obj, GradPoint& at, LbfgsMemory& memory, const LbfgsConfig& cfg,
               double tol, int budget, EpochMeter* meter, const IterateObserver& observer,
               std::optional<int> stage) {
  RunOutcome out;
  while (true) {
    if (at.eval.gradient.norm() <= tol) {
      out.converged = true;
      return out;
    }
    if (out.iterations >= budget) return out;

    Vector dir = two_loop_direction(memory, at.eval.gradient);
    double slope = at.eval.gradient.dot(dir);
    if (!(slope < 0.0)) {
      // Stale curvature can yield a non-descent direction; restart from steepest descent.
      memory.clear();
      dir = -at.eval.gradient;
      slope = -at.eval.gradient.squaredNorm();
    }

    const double slack = 1e-13 * std::max(1.0, std::abs(at.eval.value));
    double t = 1.0;
    std::optional<GradPoint> accepted;
    for (int trial = 0; trial <= cfg.max_halvings; ++trial) {
      GradPoint cand = evaluate_grad(obj, at.x + t * dir, CostKind::LineSearchTrial, meter);
      if (cand.eval.value <= at.eval.value + cfg.ls_alpha * t * slope + slack) {
        accepted = std::move(cand);
        break;
      }
      t *= cfg.ls_beta;
    }
    if (!accepted) {
      out.stalled = true;
      return out;
    }
    memory.push(accepted->x - at.x, accepted->eval.gradient - at.eval.gradient);
    at = std::move(*accepted);
    ++out.iterations;
    if (!notify(observer, {at.x, meter != nullptr ? meter->epochs() : 0.0, std::nullopt, stage})) {
      out.stopped = true;
      return out;
    }
  }
}

}  // namespace

LbfgsResult lbfgs_minimize(const RegularizedObjective& obj, const Vector& x0, const LbfgsConfig& cfg,
                           EpochMeter* meter, const IterateObserver& observer) {
  cfg.validate();
  if (static_cast<std::size_t>(x0.size()) != obj.dim())
    throw Error(fmt::format("x0 has dimension {}, objective {}", x0.size(), obj.dim()));
  LbfgsMemory memory(cfg.memory);
  GradPoint at = evaluate_grad(obj, x0, CostKind::GradientEvaluation, meter);
  const RunOutcome o = run(obj, at, memory, cfg, cfg.grad_tol, cfg.max_iters, meter, observer, std::nullopt);
  LbfgsResult res;
  res.converged = o.converged;
  res.stalled = o.stalled;
  res.stopped = o.stopped;
  res.iterations = o.iterations;
  res.grad_norm = at.eval.gradient.norm();
  res.accepted_pairs = memory.accepted();
  res.skipped_pairs = memory.skipped();
  res.x = std::move(at.x);
  return res;
}

DynaLbfgsResult dyna_lbfgs(const Dataset& train, LossKind loss, const ContinuationConfig& cfg,
                           const LbfgsConfig& lbfgs, const DynaLbfgsConfig& inner, const Vector& x0,
                           EpochMeter* meter, const IterateObserver& observer) {
  cfg.validate();
  lbfgs.validate();
  if (inner.stage_iters < 1) throw Error("DynaLBFGS needs stage_iters >= 1");
  if (cfg.m0 == 0 || !(cfg.mu0 > 0.0)) throw Error("dyna_lbfgs needs a resolved config (m0, mu0)");
  if (cfg.mode != ScheduleMode::V2) throw Error("dyna_lbfgs supports only the data-adaptive schedule");
  const std::size_t total = train.size();
  if (cfg.m0 > total) throw Error(fmt::format("m0 = {} exceeds {} training rows", cfg.m0, total));
  const double coupling = cfg.mu0 * static_cast<double>(cfg.m0);
  auto epochs = [meter] { return meter != nullptr ? meter->epochs() : 0.0; };

  DynaLbfgsResult out;
  ContinuationResult& result = out.continuation;
  LbfgsMemory memory(lbfgs.memory);
  RegularizedObjective obj(loss, prefix(train, cfg.m0), cfg.mu0);
  GradPoint at = evaluate_grad(obj, x0, CostKind::GradientEvaluation, meter);
  const bool single_stage = cfg.m0 == total;

  {
    const double proxy = at.eval.gradient.norm() / std::sqrt(cfg.mu0);
    const RunOutcome o = run(obj, at, memory, lbfgs, lbfgs.grad_tol, lbfgs.max_iters, meter, observer, 0);
    if (o.stalled) result.warnings.push_back("stage 0: line search stalled");
    result.stages.push_back({.t = 0,
                             .m = cfg.m0,
                             .mu = cfg.mu0,
                             .alpha = 1.0,
                             .lambda_handover = proxy,
                             .lambda_estimate = std::nullopt,
                             .epochs_used = epochs(),
                             .newton_steps = o.iterations});
    result.stopped = o.stopped;
    if (single_stage) {
      result.converged = o.converged;
      result.final_lambda = at.eval.gradient.norm() / std::sqrt(cfg.mu0);
    }
  }

  int t = 0;
  while (obj.size() < total && !result.stopped) {
    ++t;
    if (t > cfg.max_stages) throw Error(fmt::format("continuation exceeded {} stages", cfg.max_stages));
    const std::size_t m = obj.size();
    GradientCache cache(loss, train, at.x, m, false, meter);
    GrowthState state{.current = obj,
                      .x = at.x,
                      .factorization = nullptr,
                      .residual = cfg.exact_residual ? &at.eval.gradient : nullptr,
                      .cache = cache,
                      .coupling = coupling};
    if (inner.growth == GrowthTest::QuasiNewton)
      state.inverse_hessian = [&memory](const Vector& v) -> Vector { return -two_loop_direction(memory, v); };
    const GrowthDecision decision = find_growth(state, cfg, total);
    if (decision.fallback) {
      result.warnings.push_back(fmt::format(
          "stage {}: no grid candidate passed (estimate {:.4g} > eta {:.4g}); took alpha = {:.4g}", t,
          decision.lambda_estimate, cfg.eta, decision.alpha));
    }

    RowSums grown = at.sums;
    grown += cache.extend_to(decision.n);
    const RegularizedObjective next = obj.with(decision.n, decision.nu);
    GradPoint start = grad_point(next, at.x, std::move(grown));
    // |grad| / sqrt(nu) bounds the decrement from above. Only when the bound
    // trips is the true decrement measured, as an uncharged diagnostic.
    const double handover = start.eval.gradient.norm() / std::sqrt(decision.nu);
    const double limit = cfg.handover_abort * cfg.eta;
    if (handover > limit) {
      const double exact = decrement(next, at.x);
      if (exact > limit) throw HandoverViolation(t, exact, cfg.eta, limit);
    }

    at = std::move(start);
    obj = next;
    const bool last = obj.size() == total;
    const RunOutcome o = last ? RunOutcome{}
                              : run(obj, at, memory, lbfgs, 0.0, inner.stage_iters, meter, observer, t);
    if (o.stalled) result.warnings.push_back(fmt::format("stage {}: line search stalled", t));
    result.stopped = o.stopped;
    result.stages.push_back({.t = t,
                             .m = decision.n,
                             .mu = decision.nu,
                             .alpha = decision.alpha,
                             .lambda_handover = handover,
                             .lambda_estimate = decision.lambda_estimate,
                             .epochs_used = epochs(),
                             .newton_steps = o.iterations,
                             .fallback = decision.fallback});
  }

  if (!single_stage && !result.stopped) {
    const RunOutcome tail = run(obj, at, memory, lbfgs, lbfgs.grad_tol, lbfgs.max_iters, meter, observer, t);
    if (tail.stalled) result.warnings.push_back("full problem: line search stalled");
    result.stages.back().newton_steps += tail.iterations;
    result.stages.back().epochs_used = epochs();
    result.converged = tail.converged;
    result.stopped = tail.stopped;
    result.final_lambda = at.eval.gradient.norm() / std::sqrt(obj.nu());
  }
  result.x = std::move(at.x);
  out.accepted_pairs = memory.accepted();
  out.skipped_pairs = memory.skipped();
  return out;
}

}  // namespace dyna
