#include "dyna/linalg.hpp"

#include <cmath>

#include <fmt/format.h>

#include "dyna/error.hpp"

namespace dyna {

SpdFactorization SpdFactorization::factor(const Matrix& hessian, std::string_view context) {
  if (hessian.rows() != hessian.cols())
    throw Error(fmt::format("cannot factor a {}x{} matrix", hessian.rows(), hessian.cols()));
  const Matrix sym = 0.5 * (hessian + hessian.transpose());
  if (!sym.allFinite()) {
    throw SingularHessianError(
        fmt::format("non-finite Hessian{}{}", context.empty() ? "" : " at ", context));
  }

  Eigen::LLT<Matrix> llt(sym);
  if (llt.info() == Eigen::Success) return {std::move(llt), 0.0};

  double jitter = kInitialJitter;
  for (int k = 0; k < kMaxEscalations; ++k, jitter *= 2.0) {
    Matrix shifted = sym;
    shifted.diagonal().array() += jitter;
    llt.compute(shifted);
    if (llt.info() == Eigen::Success) return {std::move(llt), jitter};
  }
  throw SingularHessianError(fmt::format("Hessian not positive definite{}{} after {} jitter escalations",
                                         context.empty() ? "" : " at ", context, kMaxEscalations));
}

Vector SpdFactorization::solve(const Vector& b) const {
  if (static_cast<std::size_t>(b.size()) != dim())
    throw Error(fmt::format("solve: length {} vs dim {}", b.size(), dim()));
  return llt_.solve(b);
}

double SpdFactorization::quad_form_inv(const Vector& b) const {
  if (static_cast<std::size_t>(b.size()) != dim())
    throw Error(fmt::format("quad_form_inv: length {} vs dim {}", b.size(), dim()));
  return llt_.matrixL().solve(b).squaredNorm();
}

}  // namespace dyna
