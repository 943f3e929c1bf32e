#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dyna/cost.hpp"
#include "dyna/linalg.hpp"
#include "dyna/newton.hpp"
#include "dyna/objective.hpp"

namespace dyna {

// Uniform-convergence bound model V(m) = c * capacity / m.
struct GeneralizationBound {
  double c = 1.0;
  double capacity = 1.0;

  double operator()(double m) const noexcept { return c * capacity / m; }
};

enum class ScheduleMode { V1, V2 };

const char* to_string(ScheduleMode mode) noexcept;

struct ContinuationConfig {
  double eta = 0.2;      // quadratic-region threshold, in (0, 1/4)
  double beta = 1.0;     // split parameter of the sample-growth bound
  double bound_c = 1.0;  // constant c in V(m) = c d / m
  std::size_t m0 = 0;    // 0 resolves to max(4 d, 128), clamped to N
  double mu0 = 0.0;      // 0 resolves to nu_final * N / m0 so that nu * n stays constant
  ScheduleMode mode = ScheduleMode::V2;
  std::vector<double> alpha_grid = {0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.25};
  std::optional<double> fixed_alpha;  // V1: geometric schedule with this ratio
  // Add the (m/n) * residual term to the grown gradient, making it exact when
  // the previous stage was not solved to optimality.
  bool exact_residual = true;
  double handover_abort = 2.0;  // abort when a measured hand-over decrement exceeds this * eta
  int max_stages = 10000;

  void validate() const;
  // Fills m0 / mu0 defaults for a training set of N rows in d dimensions.
  ContinuationConfig resolved(std::size_t total, std::size_t dim, double nu_final) const;
};

struct StageRecord {
  int t = 0;
  std::size_t m = 0;
  double mu = 0.0;
  double alpha = 1.0;                     // m_{t-1} / m_t
  double lambda_handover = 0.0;           // measured decrement of f_t at x_{t-1}
  std::optional<double> lambda_estimate;  // value used for the growth decision
  double epochs_used = 0.0;               // cumulative
  int newton_steps = 0;
  bool fallback = false;                  // no grid candidate passed the test
};

// Smallest nu in (0, mu] with decrement of f_nu at x*_mu at most eta, given |x*_mu|.
double nu_lower_bound(double mu, double x_norm, double eta);
// Same with the data-independent bound |x*_mu|^2 <= 2 Phi / mu.
double nu_lower_bound_apriori(double mu, double phi, double eta);

struct AlphaStar {
  double alpha = 1.0;
  double u = 0.0;           // 1 - alpha
  bool clipped = false;     // the inequality holds on all of [0, 1]: alpha = 0
  bool degenerate = false;  // no growth possible: alpha = 1
};

// Smallest alpha in [0, 1) with
//   (1 + beta) mu^2 |x|^2 u^2 + (1 + 1/beta) 2 L V(m) u^3 <= mu eta^2,  u = 1 - alpha,
// found by bisection on u to 1e-12. beta = 1 gives
//   mu^2 |x|^2 u^2 + 2 L V(m) u^3 <= mu eta^2 / 2.
AlphaStar alpha_star(double mu, std::size_t m, double x_norm, double lipschitz,
                     const GeneralizationBound& bound, double eta, double beta = 1.0);

// Raw row sums at a fixed point over rows [begin, end), extended lazily.
// Snapshots are kept for every requested end so that nested candidates are
// served without touching rows twice.
class GradientCache {
 public:
  GradientCache(LossKind loss, const Dataset& data, Vector x, std::size_t begin, bool with_hessian,
                EpochMeter* meter);

  const RowSums& extend_to(std::size_t end);
  std::size_t begin() const noexcept { return begin_; }
  std::size_t scanned_end() const noexcept { return end_; }
  const Vector& x() const noexcept { return x_; }

 private:
  LossKind loss_;
  const Dataset* data_;
  Vector x_;
  std::size_t begin_;
  std::size_t end_;
  bool with_hessian_;
  EpochMeter* meter_;
  RowSums running_;
  std::map<std::size_t, RowSums> snapshots_;
};

// Gradient of f^{1:n}_nu at x from the new rows only:
//   (1/n) sum_{k=m+1}^{n} grad loss_k(x) + (nu - mu m / n) x,
// plus (m/n) * residual when the residual gradient of `prev` at x is supplied.
Vector extended_gradient(const RegularizedObjective& prev, const Vector& x, double nu, std::size_t n,
                         GradientCache& cache, const Vector* residual = nullptr);

// g^T H^{-1} g + (mu - nu) |H^{-1} g|^2 with H the factored Hessian of the
// previous stage: a first-order estimate of the squared decrement after the
// regularizer drops from mu to nu.
double taylor_decrement_estimate(const SpdFactorization& factorization, const Vector& g, double mu,
                                 double nu);

struct GrowthState {
  const RegularizedObjective& current;  // f^{1:m}_mu
  const Vector& x;
  // Hessian factor of `current` at x. Without it, `inverse_hessian` (an
  // approximate H^{-1} v) takes its place; with neither, the test falls back to
  // the gradient-norm condition |g| <= eta sqrt(nu).
  const SpdFactorization* factorization = nullptr;
  std::function<Vector(const Vector&)> inverse_hessian = {};
  const Vector* residual = nullptr;
  GradientCache& cache;
  double coupling = 1.0;  // nu * n held at this constant
};

struct GrowthDecision {
  double alpha = 1.0;  // m / n
  double nu = 0.0;
  std::size_t n = 0;
  double lambda_estimate = 0.0;
  bool feasible = false;
  bool fallback = false;  // nothing passed; the gentlest grid step was taken
  bool complete = false;  // already at n = N
  int candidates = 0;
};

// Scans the grid from the largest alpha down and keeps the smallest alpha
// whose estimate stays within eta. The scan stops at the first failing
// candidate, so rows past it are never touched.
GrowthDecision find_growth(const GrowthState& state, const ContinuationConfig& cfg,
                           std::size_t total);

struct ScheduleStep {
  std::size_t n;
  double nu;
  double alpha;
};

// A-priori (V1) schedule: fixed_alpha when set, otherwise the larger of
// alpha_star with |x*|^2 <= 2 Phi / mu and the Phi-based nu bound.
std::vector<ScheduleStep> apriori_schedule(const ContinuationConfig& cfg, std::size_t total,
                                           double phi, double lipschitz, std::size_t capacity);

struct ContinuationResult {
  Vector x;
  std::vector<StageRecord> stages;
  bool converged = false;
  bool stopped = false;
  double final_lambda = 0.0;
  std::vector<std::string> warnings;
};

// Continuation Newton over growing prefixes of `train`. The config must be
// resolved (m0, mu0 set). Throws HandoverViolation when a stage starts too far
// outside the quadratic region.
ContinuationResult dyna_newton(const Dataset& train, LossKind loss, const ContinuationConfig& cfg,
                               const NewtonConfig& newton, const Vector& x0,
                               EpochMeter* meter = nullptr, const IterateObserver& observer = {});

}  // namespace dyna
