#include "dyna/newton.hpp"

#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "dyna/error.hpp"

namespace dyna {

namespace {

// Relative slack on the sufficient-decrease test; below it the comparison is
// roundoff in the row sums.
constexpr double kRoundoffSlack = 1e-13;

}  // namespace

void NewtonConfig::validate() const {
  if (!(ls_alpha > 0.0 && ls_alpha < 0.5)) throw Error(fmt::format("ls_alpha {} outside (0, 0.5)", ls_alpha));
  if (!(ls_beta > 0.0 && ls_beta < 1.0)) throw Error(fmt::format("ls_beta {} outside (0, 1)", ls_beta));
  if (!(eps > 0.0)) throw Error(fmt::format("eps {} must be positive", eps));
  if (max_iters < 0) throw Error("max_iters must be non-negative");
  if (fixed_iters && *fixed_iters < 0) throw Error("fixed_iters must be non-negative");
  if (max_halvings < 1) throw Error("max_halvings must be positive");
}

EvaluatedPoint evaluate_point(const RegularizedObjective& obj, const Vector& x, EpochMeter* meter) {
  EvaluatedPoint out{x, obj.sums(x, true)};
  charge(meter, CostKind::Evaluation, obj.size());
  return out;
}

NewtonDirection newton_direction(const RegularizedObjective& obj, const EvaluatedPoint& at) {
  EvalReport eval = obj.finalize(at.sums, at.x);
  if (!eval.hessian) throw Error("Newton direction needs Hessian sums");
  auto factorization = SpdFactorization::factor(
      *eval.hessian, fmt::format("n = {}, nu = {:.6g}", obj.size(), obj.nu()));
  Vector step = -factorization.solve(eval.gradient);
  const double lambda = std::sqrt(factorization.quad_form_inv(eval.gradient));
  return {std::move(eval), std::move(factorization), std::move(step), lambda};
}

std::pair<EvaluatedPoint, NewtonStepReport> line_search(const RegularizedObjective& obj,
                                                        const EvaluatedPoint& at,
                                                        NewtonDirection dir,
                                                        const NewtonConfig& cfg,
                                                        EpochMeter* meter) {
  if (dir.lambda == 0.0) {
    return {at, NewtonStepReport{.lambda = 0.0, .step_size = 1.0, .ls_trials = 1,
                                 .factorization = std::move(dir.factorization)}};
  }
  const double f0 = dir.eval.value;
  const double slope = dir.eval.gradient.dot(dir.step);
  const double slack = kRoundoffSlack * std::max(1.0, std::abs(f0));

  double t = 1.0;
  for (int trial = 1; trial <= cfg.max_halvings; ++trial) {
    Vector candidate = at.x + t * dir.step;
    RowSums sums = obj.sums(candidate, true);
    charge(meter, CostKind::LineSearchTrial, obj.size());
    const double ft = obj.finalize(sums, candidate).value;
    if (std::isfinite(ft) && ft <= f0 + cfg.ls_alpha * t * slope + slack) {
      return {EvaluatedPoint{std::move(candidate), std::move(sums)},
              NewtonStepReport{.lambda = dir.lambda, .step_size = t, .ls_trials = trial,
                               .factorization = std::move(dir.factorization)}};
    }
    t *= cfg.ls_beta;
  }
  throw StalledStepError(fmt::format(
      "line search stalled after {} trials (n = {}, nu = {:.6g}, decrement {:.6g})", cfg.max_halvings,
      obj.size(), obj.nu(), dir.lambda));
}

std::pair<Vector, NewtonStepReport> newton_step(const RegularizedObjective& obj, const Vector& x,
                                                const NewtonConfig& cfg) {
  cfg.validate();
  const EvaluatedPoint at = evaluate_point(obj, x, nullptr);
  auto [next, report] = line_search(obj, at, newton_direction(obj, at), cfg, nullptr);
  return {std::move(next.x), std::move(report)};
}

double decrement(const RegularizedObjective& obj, const Vector& x) {
  return newton_direction(obj, evaluate_point(obj, x, nullptr)).lambda;
}

NewtonResult minimize_from(const RegularizedObjective& obj, EvaluatedPoint start,
                           const NewtonConfig& cfg, EpochMeter* meter,
                           const IterateObserver& observer, std::optional<int> stage) {
  cfg.validate();
  NewtonResult result;
  result.point = std::move(start);
  const int budget = cfg.fixed_iters.value_or(cfg.max_iters);

  NewtonDirection dir = newton_direction(obj, result.point);
  for (int it = 0; it < budget; ++it) {
    if (!cfg.fixed_iters && 0.5 * dir.lambda * dir.lambda <= cfg.eps) break;
    const double lambda = dir.lambda;
    auto [next, report] = line_search(obj, result.point, std::move(dir), cfg, meter);
    result.point = std::move(next);
    ++result.iterations;
    const double epochs = meter != nullptr ? meter->epochs() : 0.0;
    dir = newton_direction(obj, result.point);
    result.trace.push_back({lambda, dir.eval.value, report.step_size, report.ls_trials, epochs});
    if (!notify(observer, IterateInfo{result.point.x, epochs, dir.lambda, stage})) {
      result.stopped = true;
      break;
    }
  }
  result.final_lambda = dir.lambda;
  result.converged = 0.5 * dir.lambda * dir.lambda <= cfg.eps;
  result.final_direction = std::move(dir);
  return result;
}

NewtonResult minimize(const RegularizedObjective& obj, const Vector& x0, const NewtonConfig& cfg,
                      EpochMeter* meter, const IterateObserver& observer) {
  return minimize_from(obj, evaluate_point(obj, x0, meter), cfg, meter, observer);
}

}  // namespace dyna
