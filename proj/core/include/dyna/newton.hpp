#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "dyna/cost.hpp"
#include "dyna/linalg.hpp"
#include "dyna/objective.hpp"

namespace dyna {

struct NewtonConfig {
  double ls_alpha = 0.1;  // sufficient-decrease constant, in (0, 0.5)
  double ls_beta = 0.5;   // backtracking shrink factor, in (0, 1)
  double eps = 1e-12;     // stop once lambda^2 / 2 <= eps
  int max_iters = 100;
  std::optional<int> fixed_iters;  // run exactly this many steps, ignoring eps
  int max_halvings = 60;

  void validate() const;
};

struct NewtonStepReport {
  double lambda = 0.0;     // decrement at the pre-step point
  double step_size = 1.0;  // accepted backtracking t
  int ls_trials = 1;
  SpdFactorization factorization;  // of the Hessian at the pre-step point
};

// A point together with the raw row sums of some objective at that point.
struct EvaluatedPoint {
  Vector x;
  RowSums sums;
};

EvaluatedPoint evaluate_point(const RegularizedObjective& obj, const Vector& x, EpochMeter* meter);

// Newton direction and decrement at an evaluated point, before any line search.
struct NewtonDirection {
  EvalReport eval;
  SpdFactorization factorization;
  Vector step;
  double lambda;
};

NewtonDirection newton_direction(const RegularizedObjective& obj, const EvaluatedPoint& at);

// Backtracking along `dir.step`. Every trial is a fused value/gradient/Hessian
// pass, so the returned point carries the sums the next iteration needs.
std::pair<EvaluatedPoint, NewtonStepReport> line_search(const RegularizedObjective& obj,
                                                        const EvaluatedPoint& at,
                                                        NewtonDirection dir,
                                                        const NewtonConfig& cfg,
                                                        EpochMeter* meter);

std::pair<Vector, NewtonStepReport> newton_step(const RegularizedObjective& obj, const Vector& x,
                                                const NewtonConfig& cfg);

// sqrt(g^T H^{-1} g) at x
double decrement(const RegularizedObjective& obj, const Vector& x);

struct NewtonIterate {
  double lambda;
  double value;
  double step_size;
  int ls_trials;
  double epochs;
};

struct NewtonResult {
  EvaluatedPoint point;
  bool converged = false;
  bool stopped = false;  // the observer asked to stop
  int iterations = 0;
  double final_lambda = 0.0;
  std::vector<NewtonIterate> trace;
  // Direction at the final point; its factorization and gradient describe
  // where the solve stopped.
  std::optional<NewtonDirection> final_direction;

  const Vector& x() const noexcept { return point.x; }
};

// Damped Newton from an already evaluated point.
NewtonResult minimize_from(const RegularizedObjective& obj, EvaluatedPoint start,
                           const NewtonConfig& cfg, EpochMeter* meter = nullptr,
                           const IterateObserver& observer = {}, std::optional<int> stage = {});

NewtonResult minimize(const RegularizedObjective& obj, const Vector& x0, const NewtonConfig& cfg,
                      EpochMeter* meter = nullptr, const IterateObserver& observer = {});

}  // namespace dyna
