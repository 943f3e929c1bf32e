#include "dyna/checks.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

#include <Eigen/LU>
#include <fmt/format.h>

#include "dyna/continuation.hpp"
#include "dyna/error.hpp"
#include "dyna/lbfgs.hpp"
#include "dyna/newton.hpp"
#include "dyna/objective.hpp"
#include "dyna/saga.hpp"

namespace dyna {

namespace {

Vector random_vector(std::mt19937_64& rng, std::size_t d, double scale) {
  std::normal_distribution<double> g(0.0, scale);
  Vector v(static_cast<Eigen::Index>(d));
  for (auto& e : v) e = g(rng);
  return v;
}

Dataset random_regression(std::mt19937_64& rng, std::size_t n, std::size_t d) {
  Matrix z(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  std::normal_distribution<double> g;
  for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] = g(rng);
  Vector y(static_cast<Eigen::Index>(n));
  for (auto& v : y) v = g(rng);
  return Dataset::from_dense(z, y, LabelKind::Real);
}

CheckResult check(std::string name, const std::function<std::string()>& body) {
  try {
    std::string failure = body();
    return {std::move(name), failure.empty(), failure.empty() ? "ok" : failure};
  } catch (const std::exception& e) {
    return {std::move(name), false, e.what()};
  }
}

}  // namespace

std::vector<CheckResult> run_property_checks(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<CheckResult> out;

  out.push_back(check("gradient matches central differences", [&]() -> std::string {
    for (int k = 0; k < 10; ++k) {
      const LossKind kind = k % 2 == 0 ? LossKind::Logistic : LossKind::Quadratic;
      const Dataset data = kind == LossKind::Logistic ? synthesize_logistic(40, 6, seed + k, 1.0)
                                                      : random_regression(rng, 40, 6);
      const RegularizedObjective obj(kind, prefix(data, data.size()), 0.05);
      const Vector x = random_vector(rng, 6, 1.0);
      const Vector g = obj.evaluate(x, false).gradient;
      Vector fd(6);
      for (int j = 0; j < 6; ++j) {
        const double h = 1e-6 * std::max(1.0, std::abs(x[j]));
        Vector a = x, b = x;
        a[j] += h;
        b[j] -= h;
        fd[j] = (obj.value(a) - obj.value(b)) / (2 * h);
      }
      const double rel = (g - fd).norm() / std::max(g.norm(), 1e-12);
      if (rel > 1e-5) return fmt::format("relative error {:.3g}", rel);
    }
    return {};
  }));

  out.push_back(check("Hessian-vector product matches gradient differences", [&]() -> std::string {
    for (int k = 0; k < 10; ++k) {
      const Dataset data = synthesize_logistic(40, 5, seed + 100 + k, 1.0);
      const RegularizedObjective obj(LossKind::Logistic, prefix(data, data.size()), 0.01);
      const Vector x = random_vector(rng, 5, 1.0);
      const Vector v = random_vector(rng, 5, 1.0);
      const Vector hv = *obj.evaluate(x, true).hessian * v;
      const double h = 1e-5;
      const Vector fd = (obj.evaluate(x + h * v, false).gradient - obj.evaluate(x - h * v, false).gradient) / (2 * h);
      const double rel = (hv - fd).norm() / std::max(hv.norm(), 1e-12);
      if (rel > 1e-4) return fmt::format("relative error {:.3g}", rel);
    }
    return {};
  }));

  out.push_back(check("decrement equals sqrt(g' H^-1 g) by explicit inverse", [&]() -> std::string {
    const Dataset data = synthesize_logistic(60, 4, seed + 7, 2.0);
    const RegularizedObjective obj(LossKind::Logistic, prefix(data, data.size()), 0.02);
    const Vector x = random_vector(rng, 4, 0.5);
    const EvalReport e = obj.evaluate(x, true);
    const double oracle = std::sqrt(e.gradient.dot(e.hessian->inverse() * e.gradient));
    const double got = decrement(obj, x);
    if (std::abs(got - oracle) > 1e-10 * std::max(1.0, oracle)) return fmt::format("{} vs {}", got, oracle);
    return {};
  }));

  out.push_back(check("one Newton step solves a quadratic", [&]() -> std::string {
    const Dataset data = random_regression(rng, 30, 5);
    const RegularizedObjective obj(LossKind::Quadratic, prefix(data, data.size()), 0.1);
    const NewtonResult r = minimize(obj, Vector::Zero(5), NewtonConfig{});
    const Matrix z = data.to_dense();
    Vector y(30);
    for (int i = 0; i < 30; ++i) y[i] = data.label(static_cast<std::size_t>(i));
    const Vector exact = (z.transpose() * z / 30.0 + 0.1 * Matrix::Identity(5, 5)).ldlt().solve(z.transpose() * y / 30.0);
    if (r.iterations != 1) return fmt::format("{} iterations", r.iterations);
    if ((r.x() - exact).norm() > 1e-10) return fmt::format("error {:.3g}", (r.x() - exact).norm());
    return {};
  }));

  out.push_back(check("regularization bound lands on the boundary", [&]() -> std::string {
    const Dataset data = synthesize_logistic(80, 4, seed + 11, 2.0);
    const double mu = 0.05, eta = 0.2;
    const RegularizedObjective obj(LossKind::Logistic, prefix(data, data.size()), mu);
    NewtonConfig cfg;
    cfg.eps = 1e-20;
    const Vector xs = minimize(obj, Vector::Zero(4), cfg).x();
    const double nu = nu_lower_bound(mu, xs.norm(), eta);
    const double lhs = (mu - nu) * xs.norm();
    const double rhs = eta * std::sqrt(nu);
    if (std::abs(lhs - rhs) > 1e-8 * rhs) return fmt::format("{} vs {}", lhs, rhs);
    const double lam = decrement(obj.with(obj.size(), nu), xs);
    if (lam > eta) return fmt::format("decrement {} exceeds eta", lam);
    return {};
  }));

  out.push_back(check("two-loop direction is a descent direction", [&]() -> std::string {
    LbfgsMemory mem(5);
    for (int k = 0; k < 8; ++k) {
      const Vector s = random_vector(rng, 6, 1.0);
      mem.push(s, s + 0.1 * random_vector(rng, 6, 1.0));
    }
    for (int k = 0; k < 10; ++k) {
      const Vector g = random_vector(rng, 6, 1.0);
      if (!(g.dot(two_loop_direction(mem, g)) < 0.0)) return "non-descent direction";
    }
    return {};
  }));

  out.push_back(check("SAGA running average survives recomputation", [&]() -> std::string {
    const Dataset data = synthesize_logistic(50, 5, seed + 13, 1.0);
    const RegularizedObjective obj(LossKind::Logistic, prefix(data, data.size()), 0.05);
    SagaConfig cfg;
    cfg.epochs = 25;
    cfg.seed = seed;
    const SagaResult r = saga_run(obj, Vector::Zero(5), cfg);
    if (r.drift_checks < 2) return "drift check did not run";
    if (r.max_drift > 1e-8) return fmt::format("drift {:.3g}", r.max_drift);
    return {};
  }));

  out.push_back(check("epoch accounting", [&]() -> std::string {
    EpochMeter m(1000);
    m.charge({CostKind::Evaluation, 1000});
    m.charge({CostKind::LineSearchTrial, 1000});
    m.charge({CostKind::LineSearchTrial, 1000});
    if (std::abs(m.epochs() - 3.0) > 1e-12) return fmt::format("{} epochs", m.epochs());
    return {};
  }));

  return out;
}

}  // namespace dyna
