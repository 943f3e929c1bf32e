#include "dyna/continuation.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "dyna/error.hpp"

namespace dyna {

const char* to_string(ScheduleMode mode) noexcept { return mode == ScheduleMode::V1 ? "v1" : "v2"; }

void ContinuationConfig::validate() const {
  if (!(eta > 0.0 && eta < 0.25)) throw Error(fmt::format("eta {} outside (0, 1/4)", eta));
  if (!(beta > 0.0)) throw Error(fmt::format("beta {} must be positive", beta));
  if (!(bound_c >= 0.0)) throw Error(fmt::format("bound constant {} must be non-negative", bound_c));
  if (alpha_grid.empty()) throw Error("alpha grid is empty");
  for (std::size_t i = 0; i < alpha_grid.size(); ++i) {
    if (!(alpha_grid[i] > 0.0 && alpha_grid[i] < 1.0))
      throw Error(fmt::format("alpha grid value {} outside (0, 1)", alpha_grid[i]));
    if (i > 0 && !(alpha_grid[i] < alpha_grid[i - 1]))
      throw Error("alpha grid must be strictly descending");
  }
  if (fixed_alpha && !(*fixed_alpha > 0.0 && *fixed_alpha < 1.0))
    throw Error(fmt::format("fixed alpha {} outside (0, 1)", *fixed_alpha));
  if (!(handover_abort >= 1.0)) throw Error("handover_abort must be at least 1");
  if (max_stages < 1) throw Error("max_stages must be positive");
}

ContinuationConfig ContinuationConfig::resolved(std::size_t total, std::size_t dim,
                                                double nu_final) const {
  validate();
  if (total == 0) throw Error("empty training set");
  if (!(nu_final > 0.0)) throw Error(fmt::format("final regularization {} must be positive", nu_final));
  ContinuationConfig out = *this;
  if (out.m0 == 0) out.m0 = std::max<std::size_t>(4 * dim, 128);
  out.m0 = std::min(out.m0, total);
  const double coupled_mu0 = nu_final * static_cast<double>(total) / static_cast<double>(out.m0);
  if (out.mu0 == 0.0) {
    out.mu0 = coupled_mu0;
  } else if (std::abs(out.mu0 - coupled_mu0) > 1e-12 * coupled_mu0) {
    throw Error(fmt::format("mu0 = {} and m0 = {} end the schedule at nu = {}, not the requested {}",
                            out.mu0, out.m0, out.mu0 * static_cast<double>(out.m0) / static_cast<double>(total),
                            nu_final));
  }
  return out;
}

// ---------------------------------------------------------------------------
// regularization and growth bounds

namespace {

// nu_min / mu = 1 - (sqrt(B^2 + 4B) - B) / 2, with the difference written as
// 4B / (sqrt(B^2 + 4B) + B) to avoid cancellation for large B.
double nu_ratio(double b) {
  if (std::isinf(b)) return 0.0;
  const double root = std::sqrt(b * b + 4.0 * b);
  return 1.0 - 0.5 * (4.0 * b / (root + b));
}

}  // namespace

double nu_lower_bound(double mu, double x_norm, double eta) {
  if (!(mu > 0.0)) throw Error("nu_lower_bound needs mu > 0");
  if (!(x_norm >= 0.0)) throw Error("nu_lower_bound needs |x| >= 0");
  if (x_norm == 0.0) return 0.0;
  const double b = eta * eta / (mu * x_norm * x_norm);
  return mu * nu_ratio(b);
}

double nu_lower_bound_apriori(double mu, double phi, double eta) {
  if (!(mu > 0.0) || !(phi > 0.0)) throw Error("nu_lower_bound_apriori needs mu > 0 and Phi > 0");
  const double b = eta * eta / (2.0 * phi);
  return mu * nu_ratio(b);
}

AlphaStar alpha_star(double mu, std::size_t m, double x_norm, double lipschitz,
                     const GeneralizationBound& bound, double eta, double beta) {
  if (!(mu > 0.0) || m == 0 || !(x_norm >= 0.0) || !(lipschitz >= 0.0) || !(eta > 0.0) || !(beta > 0.0))
    throw Error("alpha_star needs positive inputs");
  const double quad = (1.0 + beta) * mu * mu * x_norm * x_norm;
  const double cubic = (1.0 + 1.0 / beta) * 2.0 * lipschitz * bound(static_cast<double>(m));
  const double rhs = mu * eta * eta;
  auto lhs = [&](double u) { return quad * u * u + cubic * u * u * u; };

  AlphaStar out;
  if (lhs(1.0) <= rhs) {
    out.u = 1.0;
    out.alpha = 0.0;
    out.clipped = true;
    return out;
  }
  double lo = 0.0;
  double hi = 1.0;
  while (hi - lo > 1e-12) {
    const double mid = 0.5 * (lo + hi);
    (lhs(mid) <= rhs ? lo : hi) = mid;
  }
  out.u = lo;
  out.alpha = 1.0 - lo;
  out.degenerate = lo <= 1e-12;
  return out;
}

// ---------------------------------------------------------------------------
// growth decision

GradientCache::GradientCache(LossKind loss, const Dataset& data, Vector x, std::size_t begin,
                             bool with_hessian, EpochMeter* meter)
    : loss_(loss),
      data_(&data),
      x_(std::move(x)),
      begin_(begin),
      end_(begin),
      with_hessian_(with_hessian),
      meter_(meter),
      running_(RowSums::zero(data.dim(), with_hessian)) {
  if (begin > data.size()) throw Error(fmt::format("cache start {} beyond {} rows", begin, data.size()));
  snapshots_.emplace(begin, running_);
}

const RowSums& GradientCache::extend_to(std::size_t end) {
  if (end > data_->size())
    throw Error(fmt::format("requested rows up to {} but the dataset has {}", end, data_->size()));
  if (auto it = snapshots_.find(end); it != snapshots_.end()) return it->second;
  if (end < end_)
    throw Error(fmt::format("rows up to {} were scanned past without a snapshot at {}", end_, end));
  running_ += accumulate_rows(loss_, *data_, end_, end, x_, with_hessian_);
  charge(meter_, CostKind::GrowthScan, end - end_);
  end_ = end;
  return snapshots_.emplace(end, running_).first->second;
}

Vector extended_gradient(const RegularizedObjective& prev, const Vector& x, double nu, std::size_t n,
                         GradientCache& cache, const Vector* residual) {
  const std::size_t m = prev.size();
  const double mu = prev.nu();
  if (n < m) throw Error(fmt::format("grown sample {} smaller than current {}", n, m));
  if (n > prev.dataset().size())
    throw Error(fmt::format("grown sample {} exceeds {} available rows", n, prev.dataset().size()));
  if (cache.begin() != m) throw Error("gradient cache does not start at the current prefix end");
  if (nu > mu * (1.0 + 1e-12)) throw Error(fmt::format("nu = {} exceeds mu = {}", nu, mu));

  const double inv_n = 1.0 / static_cast<double>(n);
  const double ratio = static_cast<double>(m) * inv_n;
  Vector g = inv_n * cache.extend_to(n).gradient + (nu - mu * ratio) * x;
  if (residual != nullptr) g += ratio * (*residual);
  return g;
}

double taylor_decrement_estimate(const SpdFactorization& factorization, const Vector& g, double mu,
                                 double nu) {
  if (g.isZero(0.0)) return 0.0;
  const Vector h_inv_g = factorization.solve(g);
  return factorization.quad_form_inv(g) + (mu - nu) * h_inv_g.squaredNorm();
}

GrowthDecision find_growth(const GrowthState& state, const ContinuationConfig& cfg, std::size_t total) {
  const std::size_t m = state.current.size();
  const double mu = state.current.nu();
  GrowthDecision out;
  if (m >= total) {
    out.complete = true;
    out.n = total;
    out.nu = mu;
    return out;
  }

  auto candidate_n = [&](double alpha) {
    const auto raw = static_cast<std::size_t>(std::llround(static_cast<double>(m) / alpha));
    return std::min(total, std::max(m + 1, raw));
  };

  auto assess = [&](std::size_t n) {
    const double nu = state.coupling / static_cast<double>(n);
    const Vector g = extended_gradient(state.current, state.x, nu, n, state.cache, state.residual);
    double estimate = 0.0;
    if (state.factorization != nullptr) {
      estimate = std::sqrt(std::max(0.0, taylor_decrement_estimate(*state.factorization, g, mu, nu)));
    } else if (state.inverse_hessian) {
      const Vector h_inv_g = state.inverse_hessian(g);
      estimate = std::sqrt(std::max(0.0, g.dot(h_inv_g) + (mu - nu) * h_inv_g.squaredNorm()));
    } else {
      estimate = g.norm() / std::sqrt(nu);
    }
    return std::pair{nu, estimate};
  };

  std::optional<GrowthDecision> best;
  std::optional<GrowthDecision> first;
  std::size_t last_n = 0;
  for (double alpha : cfg.alpha_grid) {
    const std::size_t n = candidate_n(alpha);
    if (n == last_n) continue;
    last_n = n;
    const auto [nu, estimate] = assess(n);
    ++out.candidates;
    GrowthDecision cand;
    cand.alpha = static_cast<double>(m) / static_cast<double>(n);
    cand.nu = nu;
    cand.n = n;
    cand.lambda_estimate = estimate;
    cand.feasible = estimate <= cfg.eta;
    if (!first) first = cand;
    if (!cand.feasible) break;
    best = cand;
    if (n == total) break;
  }

  const int tried = out.candidates;
  if (best) {
    out = *best;
  } else {
    out = *first;
    out.fallback = true;
  }
  out.candidates = tried;
  return out;
}

std::vector<ScheduleStep> apriori_schedule(const ContinuationConfig& cfg, std::size_t total,
                                           double phi, double lipschitz, std::size_t capacity) {
  if (cfg.m0 == 0 || !(cfg.mu0 > 0.0)) throw Error("apriori_schedule needs a resolved config");
  const GeneralizationBound bound{cfg.bound_c, static_cast<double>(capacity)};
  const double coupling = cfg.mu0 * static_cast<double>(cfg.m0);
  std::vector<ScheduleStep> out;
  std::size_t m = cfg.m0;
  double mu = cfg.mu0;
  while (m < total) {
    double alpha = 0.0;
    if (cfg.fixed_alpha) {
      alpha = *cfg.fixed_alpha;
    } else {
      const AlphaStar star = alpha_star(mu, m, std::sqrt(2.0 * phi / mu), lipschitz, bound, cfg.eta, cfg.beta);
      if (star.degenerate) throw Error(fmt::format("a-priori schedule cannot grow past m = {}", m));
      alpha = std::max(star.alpha, nu_lower_bound_apriori(mu, phi, cfg.eta) / mu);
    }
    const auto raw = static_cast<std::size_t>(std::llround(static_cast<double>(m) / alpha));
    const std::size_t n = std::min(total, std::max(m + 1, raw));
    const double nu = coupling / static_cast<double>(n);
    out.push_back({n, nu, static_cast<double>(m) / static_cast<double>(n)});
    if (static_cast<int>(out.size()) > cfg.max_stages)
      throw Error(fmt::format("a-priori schedule needs more than {} stages", cfg.max_stages));
    m = n;
    mu = nu;
  }
  return out;
}

// ---------------------------------------------------------------------------
// driver

ContinuationResult dyna_newton(const Dataset& train, LossKind loss, const ContinuationConfig& cfg,
                               const NewtonConfig& newton, const Vector& x0, EpochMeter* meter,
                               const IterateObserver& observer) {
  cfg.validate();
  newton.validate();
  if (cfg.m0 == 0 || !(cfg.mu0 > 0.0)) throw Error("dyna_newton needs a resolved config (m0, mu0)");
  const std::size_t total = train.size();
  if (cfg.m0 > total) throw Error(fmt::format("m0 = {} exceeds {} training rows", cfg.m0, total));
  const double coupling = cfg.mu0 * static_cast<double>(cfg.m0);
  auto epochs = [meter] { return meter != nullptr ? meter->epochs() : 0.0; };

  std::vector<ScheduleStep> schedule;
  if (cfg.mode == ScheduleMode::V1) {
    const RegularizedObjective full(loss, prefix(train, total), 0.0);
    schedule = apriori_schedule(cfg, total, full.phi_bound(), full.lipschitz_estimate(), train.dim());
  }

  ContinuationResult result;
  RegularizedObjective obj(loss, prefix(train, cfg.m0), cfg.mu0);

  // Stage 0: solve the smallest problem to tolerance.
  NewtonConfig solve_cfg = newton;
  solve_cfg.fixed_iters.reset();
  NewtonResult r0 = minimize_from(obj, evaluate_point(obj, x0, meter), solve_cfg, meter, observer, 0);
  result.stages.push_back({.t = 0,
                           .m = cfg.m0,
                           .mu = cfg.mu0,
                           .alpha = 1.0,
                           .lambda_handover = r0.trace.empty() ? r0.final_lambda : r0.trace.front().lambda,
                           .lambda_estimate = std::nullopt,
                           .epochs_used = epochs(),
                           .newton_steps = r0.iterations});
  if (r0.stopped) {
    result.stopped = true;
    result.final_lambda = r0.final_lambda;
    result.x = std::move(r0.point.x);
    return result;
  }
  EvaluatedPoint at = std::move(r0.point);
  NewtonDirection dir = std::move(*r0.final_direction);

  NewtonConfig stage_cfg = newton;
  stage_cfg.fixed_iters = newton.fixed_iters.value_or(1);

  int t = 0;
  while (obj.size() < total) {
    ++t;
    if (t > cfg.max_stages) throw Error(fmt::format("continuation exceeded {} stages", cfg.max_stages));
    const std::size_t m = obj.size();
    GradientCache cache(loss, train, at.x, m, true, meter);

    std::size_t n = 0;
    double nu = 0.0;
    std::optional<double> estimate;
    bool fallback = false;
    if (cfg.mode == ScheduleMode::V2) {
      const GrowthState state{.current = obj,
                              .x = at.x,
                              .factorization = &dir.factorization,
                              .residual = cfg.exact_residual ? &dir.eval.gradient : nullptr,
                              .cache = cache,
                              .coupling = coupling};
      const GrowthDecision decision = find_growth(state, cfg, total);
      n = decision.n;
      nu = decision.nu;
      estimate = decision.lambda_estimate;
      fallback = decision.fallback;
      if (fallback) {
        result.warnings.push_back(fmt::format(
            "stage {}: no grid candidate passed (estimate {:.4g} > eta {:.4g}); took alpha = {:.4g}", t,
            decision.lambda_estimate, cfg.eta, decision.alpha));
      }
    } else {
      const ScheduleStep& step = schedule.at(static_cast<std::size_t>(t - 1));
      n = step.n;
      nu = step.nu;
    }

    RowSums grown = at.sums;
    grown += cache.extend_to(n);
    const RegularizedObjective next = obj.with(n, nu);
    EvaluatedPoint start{at.x, std::move(grown)};

    // The new objective's rows are all summed already, so the exact hand-over
    // decrement costs a factorization but no data pass.
    const double handover = newton_direction(next, start).lambda;
    if (handover > cfg.handover_abort * cfg.eta)
      throw HandoverViolation(t, handover, cfg.eta, cfg.handover_abort * cfg.eta);
    NewtonResult res = minimize_from(next, std::move(start), stage_cfg, meter, observer, t);

    result.stages.push_back({.t = t,
                             .m = n,
                             .mu = nu,
                             .alpha = static_cast<double>(m) / static_cast<double>(n),
                             .lambda_handover = handover,
                             .lambda_estimate = estimate,
                             .epochs_used = epochs(),
                             .newton_steps = res.iterations,
                             .fallback = fallback});
    obj = next;
    at = std::move(res.point);
    if (res.stopped) {
      result.stopped = true;
      result.final_lambda = res.final_lambda;
      result.x = std::move(at.x);
      return result;
    }
    dir = std::move(*res.final_direction);
  }

  // Full problem: iterate to tolerance.
  NewtonResult tail = minimize_from(obj, std::move(at), solve_cfg, meter, observer, t);
  if (!result.stages.empty()) result.stages.back().newton_steps += tail.iterations;
  result.x = std::move(tail.point.x);
  result.converged = tail.converged;
  result.stopped = tail.stopped;
  result.final_lambda = tail.final_lambda;
  return result;
}

}  // namespace dyna
