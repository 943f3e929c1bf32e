#include <cmath>

#include <Eigen/LU>

#include "doctest.h"
#include "dyna/continuation.hpp"
#include "dyna/error.hpp"
#include "support.hpp"

using namespace dyna;

namespace {

Vector solve_exactly(const RegularizedObjective& obj) {
  NewtonConfig cfg;
  cfg.eps = 1e-24;
  return minimize(obj, Vector::Zero(static_cast<Eigen::Index>(obj.dim())), cfg).x();
}

ContinuationConfig resolved_for(const Dataset& train, double nu_final, ContinuationConfig cfg = {}) {
  return cfg.resolved(train.size(), train.dim(), nu_final);
}

}  // namespace

TEST_SUITE("continuation") {

TEST_CASE("regularization bound sits on the boundary and certifies the hand-over") {
  for (int k = 0; k < 20; ++k) {
    CAPTURE(k);
    const Dataset data = synthesize_logistic(80 + 10 * k, 3 + k % 4, 500 + k, 1.0 + k % 3);
    const double mu = 0.01 + 0.005 * k, eta = 0.2;
    const auto obj = testing::whole(LossKind::Logistic, data, mu);
    const Vector xs = solve_exactly(obj);
    const double nu = nu_lower_bound(mu, xs.norm(), eta);
    REQUIRE(nu > 0.0);
    REQUIRE(nu < mu);
    CHECK((mu - nu) * xs.norm() == doctest::Approx(eta * std::sqrt(nu)).epsilon(1e-8));
    CHECK(decrement(obj.with(obj.size(), nu), xs) <= eta);
  }
}

TEST_CASE("nu bound edge cases") {
  CHECK(nu_lower_bound(0.5, 0.0, 0.2) == 0.0);
  CHECK_THROWS_AS(nu_lower_bound(0.0, 1.0, 0.2), Error);
  // The a-priori form is the data-dependent form with |x|^2 = 2 Phi / mu.
  const double mu = 0.03, phi = std::log(2.0);
  CHECK(nu_lower_bound_apriori(mu, phi, 0.2) ==
        doctest::Approx(nu_lower_bound(mu, std::sqrt(2 * phi / mu), 0.2)).epsilon(1e-14));
  // Large |x| leaves almost no room; tiny |x| allows nearly dropping nu to 0.
  CHECK(nu_lower_bound(1.0, 1e6, 0.2) / 1.0 > 0.999);
  CHECK(nu_lower_bound(1.0, 1e-6, 0.2) < 1e-6);
}

TEST_CASE("gradient-norm condition implies the decrement condition") {
  // H >= nu I, so |g| <= eta sqrt(nu) forces g' H^-1 g <= eta^2.
  std::mt19937_64 rng(12);
  for (int k = 0; k < 30; ++k) {
    const Dataset data = synthesize_logistic(50, 4, 900 + k, 2.0);
    const double nu = 0.02 + 0.01 * (k % 5);
    const auto obj = testing::whole(LossKind::Logistic, data, nu);
    const Vector x = testing::gaussian(rng, 4, 0.3 * (1 + k % 4));
    const double gnorm = obj.evaluate(x, false).gradient.norm();
    const double eta = 0.2;
    if (gnorm <= eta * std::sqrt(nu)) CHECK(decrement(obj, x) <= eta);
    CHECK(decrement(obj, x) <= gnorm / std::sqrt(nu) * (1 + 1e-12));
  }
}

TEST_CASE("alpha_star closed form without the statistical term") {
  // With L = 0 the inequality is (1 + beta) mu^2 |x|^2 u^2 <= mu eta^2.
  const GeneralizationBound bound{1.0, 10.0};
  for (double beta : {0.5, 1.0, 3.0}) {
    const double mu = 0.01, x = 8.0, eta = 0.2;
    const AlphaStar a = alpha_star(mu, 100, x, 0.0, bound, eta, beta);
    const double u = eta / (x * std::sqrt((1 + beta) * mu));
    CHECK(a.u == doctest::Approx(u).epsilon(1e-10));
    CHECK(a.alpha == doctest::Approx(1 - u).epsilon(1e-10));
    CHECK_FALSE(a.clipped);
  }
}

TEST_CASE("alpha_star root satisfies the cubic with equality") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int k = 0; k < 50; ++k) {
    const double mu = 1e-4 + 0.1 * unit(rng), x = 1 + 30 * unit(rng), lip = 5 * unit(rng), eta = 0.2;
    const double beta = 0.25 + 2 * unit(rng);
    const std::size_t m = 100 + static_cast<std::size_t>(1e4 * unit(rng));
    const GeneralizationBound bound{1.0, 20.0};
    const AlphaStar a = alpha_star(mu, m, x, lip, bound, eta, beta);
    if (a.clipped || a.degenerate) continue;
    const double u = a.u;
    const double lhs = (1 + beta) * mu * mu * x * x * u * u + (1 + 1 / beta) * 2 * lip * bound(double(m)) * u * u * u;
    CHECK(std::abs(lhs - mu * eta * eta) <= 1e-10 * std::max(1.0, mu * eta * eta) + 1e-10);
  }
}

TEST_CASE("alpha_star clips when every u in [0, 1] is allowed") {
  const AlphaStar a = alpha_star(1.0, 1000, 0.01, 0.0, {}, 0.2);
  CHECK(a.clipped);
  CHECK(a.alpha == 0.0);
}

TEST_CASE("extended gradient is exact with the residual") {
  const Dataset data = synthesize_logistic(300, 4, 31, 1.0);
  std::mt19937_64 rng(7);
  const std::size_t m = 100;
  const double mu = 0.05;
  const auto prev = RegularizedObjective(LossKind::Logistic, prefix(data, m), mu);
  const Vector x = testing::gaussian(rng, 4);
  const Vector residual = prev.evaluate(x, false).gradient;
  for (std::size_t n : {100u, 137u, 250u, 300u}) {
    const double nu = mu * static_cast<double>(m) / static_cast<double>(n);
    GradientCache cache(LossKind::Logistic, data, x, m, false, nullptr);
    const Vector oracle = prev.with(n, nu).evaluate(x, false).gradient;
    CHECK(testing::relative(extended_gradient(prev, x, nu, n, cache, &residual), oracle) <= 1e-12);
    // Without it, the grown gradient is off by exactly (m / n) times the residual.
    const Vector approx = extended_gradient(prev, x, nu, n, cache);
    const double ratio = static_cast<double>(m) / static_cast<double>(n);
    CHECK(testing::relative(approx + ratio * residual, oracle) <= 1e-12);
  }
}

TEST_CASE("gradient cache touches each row once") {
  const Dataset data = synthesize_logistic(200, 3, 1, 1.0);
  EpochMeter meter(200);
  GradientCache cache(LossKind::Logistic, data, Vector::Zero(3), 50, true, &meter);
  cache.extend_to(80);
  cache.extend_to(120);
  cache.extend_to(80);  // served from the snapshot
  CHECK(meter.epochs() == doctest::Approx(70.0 / 200).epsilon(1e-15));
  CHECK(cache.scanned_end() == 120);
  CHECK_THROWS_AS(cache.extend_to(100), Error);
  CHECK_THROWS_AS(cache.extend_to(201), Error);
  CHECK(cache.extend_to(120).count == 70);
}

TEST_CASE("Taylor estimate reduces to the decrement when nu = mu") {
  const Dataset data = synthesize_logistic(150, 4, 2, 1.0);
  const auto obj = testing::whole(LossKind::Logistic, data, 0.05);
  const Vector x = Vector::Constant(4, 0.4);
  const EvalReport e = obj.evaluate(x, true);
  const auto f = factor_spd(*e.hessian);
  CHECK(taylor_decrement_estimate(f, e.gradient, 0.05, 0.05) ==
        doctest::Approx(std::pow(decrement(obj, x), 2)).epsilon(1e-12));
  CHECK(taylor_decrement_estimate(f, Vector::Zero(4), 0.05, 0.01) == 0.0);
}

TEST_CASE("Taylor estimate is first-order accurate in the regularizer change") {
  const Dataset data = synthesize_logistic(150, 4, 2, 1.0);
  const double mu = 0.05;
  const auto obj = testing::whole(LossKind::Logistic, data, mu);
  const Vector xs = solve_exactly(obj);
  const auto f = factor_spd(*obj.evaluate(xs, true).hessian);
  double previous_error = INFINITY;
  for (double drop : {0.2, 0.1, 0.05}) {
    const double nu = mu * (1 - drop);
    const Vector g = obj.with(obj.size(), nu).evaluate(xs, false).gradient;
    const double exact = std::pow(decrement(obj.with(obj.size(), nu), xs), 2);
    const double err = std::abs(taylor_decrement_estimate(f, g, mu, nu) - exact) / exact;
    CHECK(err < previous_error);
    previous_error = err;
  }
  CHECK(previous_error < 1e-2);
}

TEST_CASE("growth scan") {
  const Dataset data = synthesize_logistic(2000, 5, 17, 2.0);
  const std::size_t m = 200;
  const double mu = 10.0 / m;
  const auto obj = RegularizedObjective(LossKind::Logistic, prefix(data, m), mu);
  const Vector xs = solve_exactly(obj);
  const EvalReport e = obj.evaluate(xs, true);
  const auto f = factor_spd(*e.hessian);

  auto decide = [&](ContinuationConfig cfg) {
    GradientCache cache(LossKind::Logistic, data, xs, m, false, nullptr);
    const GrowthState state{.current = obj, .x = xs, .factorization = &f, .residual = &e.gradient,
                            .cache = cache, .coupling = mu * m};
    return find_growth(state, cfg, data.size());
  };

  SUBCASE("picks the smallest passing alpha and reports its estimate") {
    const GrowthDecision d = decide({});
    CHECK(d.feasible);
    CHECK_FALSE(d.fallback);
    CHECK(d.lambda_estimate <= 0.2);
    CHECK(d.nu * static_cast<double>(d.n) == doctest::Approx(mu * m));
    CHECK(d.alpha == doctest::Approx(static_cast<double>(m) / static_cast<double>(d.n)));
  }
  SUBCASE("falls back to the gentlest candidate when nothing passes") {
    ContinuationConfig cfg;
    cfg.eta = 1e-9;
    const GrowthDecision d = decide(cfg);
    CHECK(d.fallback);
    CHECK(d.candidates == 1);
    CHECK(d.n == 222);  // round(200 / 0.9)
  }
  SUBCASE("scan stops at the first failing candidate") {
    // Oracle: evaluate each grid point independently on the grown objective.
    ContinuationConfig cfg;
    cfg.eta = 0.12;
    std::size_t expected_n = 0;
    int expected_candidates = 0;
    for (double alpha : cfg.alpha_grid) {
      const auto n = static_cast<std::size_t>(std::llround(m / alpha));
      const double nu = mu * m / static_cast<double>(n);
      const Vector g = obj.with(n, nu).evaluate(xs, false).gradient;
      ++expected_candidates;
      if (std::sqrt(taylor_decrement_estimate(f, g, mu, nu)) > cfg.eta) break;
      expected_n = n;
    }
    const GrowthDecision d = decide(cfg);
    CHECK(d.candidates == expected_candidates);
    if (expected_n > 0) CHECK(d.n == expected_n);
  }
  SUBCASE("nothing to do at n = N") {
    const auto full = testing::whole(LossKind::Logistic, data, mu);
    GradientCache cache(LossKind::Logistic, data, xs, data.size(), false, nullptr);
    const GrowthState state{.current = full, .x = xs, .factorization = &f, .cache = cache};
    CHECK(find_growth(state, {}, data.size()).complete);
  }
}

TEST_CASE("a-priori schedule with a fixed ratio is geometric and coupled") {
  ContinuationConfig cfg;
  cfg.fixed_alpha = 0.5;
  cfg.m0 = 100;
  cfg.mu0 = 0.01;
  const auto steps = apriori_schedule(cfg, 1000, std::log(2.0), 1.0, 5);
  REQUIRE(steps.size() == 4);
  CHECK(steps[0].n == 200);
  CHECK(steps[2].n == 800);
  CHECK(steps.back().n == 1000);
  for (const auto& s : steps) CHECK(s.nu * static_cast<double>(s.n) == doctest::Approx(1.0));
}

TEST_CASE("config resolution") {
  const ContinuationConfig c = ContinuationConfig{}.resolved(10000, 50, 1e-4);
  CHECK(c.m0 == 200);
  CHECK(c.mu0 == doctest::Approx(1e-4 * 10000 / 200));
  CHECK(ContinuationConfig{}.resolved(10000, 10, 1e-4).m0 == 128);
  CHECK(ContinuationConfig{}.resolved(100, 50, 1e-2).m0 == 100);
  ContinuationConfig bad;
  bad.m0 = 100;
  bad.mu0 = 0.5;
  CHECK_THROWS_AS(bad.resolved(1000, 5, 1e-3), Error);
  bad = {};
  bad.alpha_grid = {0.5, 0.7};
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = {};
  bad.eta = 0.3;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("a single stage reduces to plain Newton") {
  const Dataset data = synthesize_logistic(300, 4, 5, 1.0);
  ContinuationConfig cfg;
  cfg.m0 = data.size();
  cfg = resolved_for(data, 1.0 / 300, cfg);
  const ContinuationResult r = dyna_newton(data, LossKind::Logistic, cfg, NewtonConfig{}, Vector::Zero(4));
  const NewtonResult plain = minimize(testing::whole(LossKind::Logistic, data, 1.0 / 300), Vector::Zero(4), NewtonConfig{});
  CHECK(r.stages.size() == 1);
  CHECK(r.converged);
  CHECK((r.x - plain.x()).norm() == 0.0);
}

TEST_CASE("continuation run keeps every hand-over inside the quadratic region") {
  const auto [train, test] = train_test_split(synthesize_logistic(6000, 8, 41, 2.0), 0.1, 1);
  const double nu = 1.0 / static_cast<double>(train.size());
  const ContinuationConfig cfg = resolved_for(train, nu);
  EpochMeter meter(train.size());
  const ContinuationResult r = dyna_newton(train, LossKind::Logistic, cfg, NewtonConfig{}, Vector::Zero(8), &meter);
  REQUIRE(r.converged);
  REQUIRE(r.stages.size() >= 2);
  CHECK(r.stages.back().m == train.size());
  CHECK(r.stages.back().mu == doctest::Approx(nu).epsilon(1e-12));
  for (std::size_t t = 1; t < r.stages.size(); ++t) {
    const StageRecord& s = r.stages[t];
    CAPTURE(t);
    CHECK(s.lambda_handover <= 1.1 * cfg.eta);
    CHECK(s.m > r.stages[t - 1].m);
    CHECK(s.epochs_used >= r.stages[t - 1].epochs_used);
    CHECK(s.mu * static_cast<double>(s.m) == doctest::Approx(cfg.mu0 * static_cast<double>(cfg.m0)));
    CHECK(s.lambda_estimate.has_value());
  }
  const Vector ref = solve_exactly(testing::whole(LossKind::Logistic, train, nu));
  const auto full = testing::whole(LossKind::Logistic, train, nu);
  CHECK(full.value(r.x) - full.value(ref) <= 1e-11);
}

TEST_CASE("an aggressive fixed ratio is caught at the hand-over") {
  const Dataset train = synthesize_logistic(20000, 40, 77, 4.0);
  ContinuationConfig cfg;
  cfg.mode = ScheduleMode::V1;
  cfg.fixed_alpha = 0.01;
  cfg.m0 = 60;
  cfg = resolved_for(train, 1.0 / 20000, cfg);
  CHECK_THROWS_AS(dyna_newton(train, LossKind::Logistic, cfg, NewtonConfig{}, Vector::Zero(40)), HandoverViolation);
}

}  // TEST_SUITE
