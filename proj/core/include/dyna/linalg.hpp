#pragma once

#include <string_view>

#include <Eigen/Cholesky>

#include "dyna/dataset.hpp"

namespace dyna {

// Cholesky factor of a symmetric positive definite matrix, possibly shifted by
// a small diagonal jitter when the plain factorization breaks down.
class SpdFactorization {
 public:
  static constexpr double kInitialJitter = 1e-12;
  static constexpr int kMaxEscalations = 30;

  // Symmetrizes (H + H^T) / 2, tries a plain Cholesky, then H + j I for
  // j = 1e-12 * 2^k, k = 0 .. kMaxEscalations - 1. `context` names the caller
  // in the SingularHessianError message.
  static SpdFactorization factor(const Matrix& hessian, std::string_view context = {});

  std::size_t dim() const noexcept { return static_cast<std::size_t>(llt_.rows()); }
  double jitter() const noexcept { return jitter_; }
  Matrix lower() const { return llt_.matrixL(); }

  // (H + jitter I)^{-1} b
  Vector solve(const Vector& b) const;
  // b^T (H + jitter I)^{-1} b, as the squared norm of L^{-1} b
  double quad_form_inv(const Vector& b) const;

 private:
  SpdFactorization(Eigen::LLT<Matrix> llt, double jitter) : llt_(std::move(llt)), jitter_(jitter) {}

  Eigen::LLT<Matrix> llt_;
  double jitter_ = 0.0;
};

inline SpdFactorization factor_spd(const Matrix& hessian, std::string_view context = {}) {
  return SpdFactorization::factor(hessian, context);
}
inline Vector solve(const SpdFactorization& f, const Vector& b) { return f.solve(b); }
inline double quad_form_inv(const SpdFactorization& f, const Vector& g) { return f.quad_form_inv(g); }

}  // namespace dyna
