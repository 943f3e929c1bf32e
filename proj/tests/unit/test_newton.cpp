#include <cmath>

#include <Eigen/LU>

#include "doctest.h"
#include "dyna/cost.hpp"
#include "dyna/error.hpp"
#include "dyna/newton.hpp"
#include "support.hpp"

using namespace dyna;

namespace {

Vector ridge_solution(const Dataset& data, double nu) {
  const Matrix z = data.to_dense();
  Vector y(static_cast<Eigen::Index>(data.size()));
  for (std::size_t i = 0; i < data.size(); ++i) y[static_cast<Eigen::Index>(i)] = data.label(i);
  const double n = static_cast<double>(data.size());
  return (z.transpose() * z / n + nu * Matrix::Identity(z.cols(), z.cols())).ldlt().solve(z.transpose() * y / n);
}

}  // namespace

TEST_SUITE("newton") {

TEST_CASE("a quadratic is solved by one full step") {
  std::mt19937_64 rng(2);
  for (int k = 0; k < 5; ++k) {
    const Dataset data = testing::regression(rng, 40, 6);
    const auto obj = testing::whole(LossKind::Quadratic, data, 0.05);
    const NewtonResult r = minimize(obj, testing::gaussian(rng, 6, 3.0), NewtonConfig{});
    CHECK(r.iterations == 1);
    CHECK(r.trace.front().step_size == 1.0);
    CHECK(r.converged);
    CHECK((r.x() - ridge_solution(data, 0.05)).norm() <= 1e-10);
  }
}

TEST_CASE("decrement equals sqrt(g' H^-1 g)") {
  std::mt19937_64 rng(3);
  const Dataset data = synthesize_logistic(80, 5, 6, 2.0);
  const auto obj = testing::whole(LossKind::Logistic, data, 0.01);
  for (int k = 0; k < 5; ++k) {
    const Vector x = testing::gaussian(rng, 5);
    const EvalReport e = obj.evaluate(x, true);
    const double oracle = std::sqrt(e.gradient.dot(e.hessian->inverse() * e.gradient));
    CHECK(decrement(obj, x) == doctest::Approx(oracle).epsilon(1e-10));
  }
}

TEST_CASE("decrement is invariant under a linear change of features") {
  // With nu = 0, replacing z by A^T z and x by A^{-1} x leaves every margin,
  // and so the decrement, unchanged.
  std::mt19937_64 rng(4);
  const Dataset data = synthesize_logistic(120, 4, 9, 1.0);
  const Matrix a = testing::gaussian(rng, std::size_t{4}, std::size_t{4}) + 3.0 * Matrix::Identity(4, 4);
  Vector y(120);
  for (int i = 0; i < 120; ++i) y[i] = data.label(static_cast<std::size_t>(i));
  const Dataset mapped = Dataset::from_dense(data.to_dense() * a, y);
  const auto f = testing::whole(LossKind::Logistic, data, 0.0);
  const auto g = testing::whole(LossKind::Logistic, mapped, 0.0);
  const Vector x = testing::gaussian(rng, 4, 0.5);
  const Vector x_mapped = a.inverse() * x;
  CHECK(g.value(x_mapped) == doctest::Approx(f.value(x)).epsilon(1e-12));
  CHECK(decrement(g, x_mapped) == doctest::Approx(decrement(f, x)).epsilon(1e-8));

  // Newton iterates map onto each other as well.
  NewtonConfig cfg;
  cfg.fixed_iters = 3;
  const Vector xf = minimize(f, x, cfg).x();
  const Vector xg = minimize(g, x_mapped, cfg).x();
  CHECK(testing::relative(a * xg, xf) <= 1e-8);
}

TEST_CASE("iterating from the minimizer does nothing") {
  const Dataset data = synthesize_logistic(100, 3, 1, 1.0);
  const auto obj = testing::whole(LossKind::Logistic, data, 0.01);
  NewtonConfig tight;
  tight.eps = 1e-24;
  const Vector xs = minimize(obj, Vector::Zero(3), tight).x();
  const NewtonResult again = minimize(obj, xs, NewtonConfig{});
  CHECK(again.iterations == 0);
  CHECK(again.converged);
}

TEST_CASE("fixed_iters runs exactly that many steps") {
  const Dataset data = synthesize_logistic(100, 3, 1, 1.0);
  const auto obj = testing::whole(LossKind::Logistic, data, 0.01);
  for (int n : {0, 1, 4, 9}) {
    NewtonConfig cfg;
    cfg.fixed_iters = n;
    CHECK(minimize(obj, Vector::Zero(3), cfg).iterations == n);
  }
}

TEST_CASE("damped phase then quadratic phase") {
  const Dataset data = synthesize_logistic(400, 6, 12, 3.0);
  const auto obj = testing::whole(LossKind::Logistic, data, 1.0 / 400);
  NewtonConfig cfg;
  cfg.eps = 1e-20;
  const NewtonResult r = minimize(obj, Vector::Constant(6, 10.0), cfg);
  REQUIRE(r.converged);
  bool damped = false;
  for (const auto& it : r.trace) damped = damped || it.step_size < 1.0;
  CHECK(damped);
  // Once lambda is small, the next one is at most about lambda^2 / (1 - lambda)^2.
  for (std::size_t i = 0; i + 1 < r.trace.size(); ++i) {
    const double l = r.trace[i].lambda;
    if (l < 0.2 && r.trace[i + 1].lambda > 1e-7) CHECK(r.trace[i + 1].lambda <= 2.0 * l * l / ((1 - l) * (1 - l)));
  }
  // Values never increase.
  for (std::size_t i = 0; i + 1 < r.trace.size(); ++i) CHECK(r.trace[i + 1].value <= r.trace[i].value + 1e-15);
}

TEST_CASE("epoch accounting charges fused passes") {
  CHECK(effective_epoch_cost({CostKind::Evaluation, 50}, 200) == 0.25);
  CHECK(effective_epoch_cost({CostKind::SagaStep, 1}, 200) == 1.0 / 200);

  // Full-batch step whose line search needs two trials: 3 passes.
  EpochMeter full(1000);
  full.charge({CostKind::Evaluation, 1000});
  full.charge({CostKind::LineSearchTrial, 1000});
  full.charge({CostKind::LineSearchTrial, 1000});
  CHECK(full.epochs() == doctest::Approx(3.0).epsilon(1e-15));

  // SAGA over n steps with n = N: one epoch.
  EpochMeter saga(1000);
  for (int i = 0; i < 1000; ++i) saga.charge({CostKind::SagaStep, 1});
  CHECK(saga.epochs() == doctest::Approx(1.0).epsilon(1e-12));

  // A stage on N / 4 rows with one trial: 0.5.
  EpochMeter stage(1000);
  stage.charge({CostKind::Evaluation, 250});
  stage.charge({CostKind::LineSearchTrial, 250});
  CHECK(stage.epochs() == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("a real Newton run is charged one pass per trial") {
  std::mt19937_64 rng(8);
  const Dataset data = testing::regression(rng, 64, 4);
  const auto obj = testing::whole(LossKind::Quadratic, data, 0.1);
  EpochMeter meter(128);
  const NewtonResult r = minimize(obj, Vector::Zero(4), NewtonConfig{}, &meter);
  // Initial evaluation plus one accepted trial, each over 64 of 128 rows.
  REQUIRE(r.iterations == 1);
  CHECK(meter.epochs() == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("observer sees every iterate and can stop the solver") {
  const Dataset data = synthesize_logistic(200, 4, 3, 1.0);
  const auto obj = testing::whole(LossKind::Logistic, data, 0.005);
  int seen = 0;
  const NewtonResult r = minimize(obj, Vector::Constant(4, 5.0), NewtonConfig{}, nullptr,
                                  [&](const IterateInfo& info) {
                                    ++seen;
                                    CHECK(info.lambda.has_value());
                                    return seen < 2;
                                  });
  CHECK(seen == 2);
  CHECK(r.stopped);
  CHECK(r.iterations == 2);
}

TEST_CASE("invalid configurations are rejected") {
  NewtonConfig cfg;
  cfg.ls_alpha = 0.5;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.ls_beta = 1.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = {};
  cfg.fixed_iters = -1;
  CHECK_THROWS_AS(cfg.validate(), Error);
}

}  // TEST_SUITE
