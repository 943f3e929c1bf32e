#include <cmath>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "doctest.h"
#include "dyna/error.hpp"
#include "dyna/linalg.hpp"
#include "support.hpp"

using namespace dyna;

TEST_SUITE("linalg") {

TEST_CASE("solve and quadratic form match the explicit inverse") {
  std::mt19937_64 rng(5);
  for (std::size_t d : {1u, 3u, 8u, 20u}) {
    const Matrix a = testing::gaussian(rng, d + 3, d);
    const Matrix h = a.transpose() * a + 0.1 * Matrix::Identity(d, d);
    const Vector b = testing::gaussian(rng, d);
    const auto f = factor_spd(h);
    CHECK(f.jitter() == 0.0);
    const Matrix inv = h.inverse();
    CHECK(testing::relative(solve(f, b), inv * b) <= 1e-10);
    CHECK(quad_form_inv(f, b) == doctest::Approx(b.dot(inv * b)).epsilon(1e-10));
    CHECK(((f.lower() * f.lower().transpose()) - h).norm() <= 1e-12 * h.norm());
  }
}

TEST_CASE("only the symmetric part is factored") {
  Matrix h(2, 2);
  h << 2.0, 1.0, 0.0, 2.0;  // symmetric part [[2, .5], [.5, 2]]
  Matrix sym(2, 2);
  sym << 2.0, 0.5, 0.5, 2.0;
  const Vector b = Vector::Ones(2);
  CHECK(testing::relative(factor_spd(h).solve(b), sym.inverse() * b) <= 1e-14);
}

TEST_CASE("a singular PSD matrix is rescued by a small jitter") {
  Matrix h = Matrix::Zero(3, 3);
  h(0, 0) = 1.0;
  h(1, 1) = 1.0;
  const auto f = factor_spd(h);
  CHECK(f.jitter() > 0.0);
  CHECK(f.jitter() <= 1e-3);
  CHECK(std::isfinite(f.quad_form_inv(Vector::Ones(3))));
}

TEST_CASE("indefinite or non-finite input fails with context") {
  Matrix h = Matrix::Identity(2, 2);
  h(1, 1) = -1.0;
  CHECK_THROWS_AS(factor_spd(h, "probe"), SingularHessianError);
  try {
    factor_spd(h, "probe");
  } catch (const SingularHessianError& e) {
    CHECK(std::string(e.what()).find("probe") != std::string::npos);
  }
  h(1, 1) = NAN;
  CHECK_THROWS_AS(factor_spd(h), SingularHessianError);
}

}  // TEST_SUITE
