#pragma once

#include <cstddef>
#include <optional>

#include "dyna/dataset.hpp"

namespace dyna {

enum class LossKind { Logistic, Quadratic };

const char* to_string(LossKind kind) noexcept;
LossKind loss_from_string(std::string_view name);

// Per-sample losses of a linear model, as functions of the margin t = <z, x>.
namespace loss {
double value(LossKind kind, double t, double y) noexcept;
double derivative(LossKind kind, double t, double y) noexcept;
double curvature(LossKind kind, double t, double y) noexcept;
}  // namespace loss

// Unnormalized sums over a contiguous block of rows at one point x: the raw
// material of an evaluation. Sums over disjoint blocks add, which lets a caller
// grow a sample without revisiting rows it has already touched.
//
// Only the upper triangle of `hessian` is populated.
struct RowSums {
  std::size_t count = 0;
  double loss = 0.0;
  Vector gradient;
  Matrix hessian;
  bool has_hessian = false;

  static RowSums zero(std::size_t dim, bool with_hessian);
  RowSums& operator+=(const RowSums& other);
};

RowSums accumulate_rows(LossKind kind, const Dataset& data, std::size_t begin, std::size_t end,
                        const Vector& x, bool want_hessian);

struct EvalReport {
  double value = 0.0;
  Vector gradient;
  std::optional<Matrix> hessian;  // full symmetric when present
};

// Gradient of one sample's loss for a linear model: coefficient * row.
struct GlmGradient {
  double coefficient = 0.0;
  SparseRow row;

  Vector dense(std::size_t dim) const;
};

// f(x) = (1/n) sum_i loss(<z_i, x>, y_i) + nu/2 |x|^2 over the first n rows.
class RegularizedObjective {
 public:
  RegularizedObjective(LossKind loss, PrefixView view, double nu);

  LossKind loss() const noexcept { return loss_; }
  const PrefixView& view() const noexcept { return view_; }
  const Dataset& dataset() const noexcept { return view_.dataset(); }
  double nu() const noexcept { return nu_; }
  std::size_t size() const noexcept { return view_.size(); }
  std::size_t dim() const noexcept { return view_.dim(); }

  // Same loss on the same dataset with a different prefix length and strength.
  RegularizedObjective with(std::size_t n, double nu) const;

  EvalReport evaluate(const Vector& x, bool want_hessian) const;
  double value(const Vector& x) const;
  // Turns raw sums over exactly this objective's rows into an evaluation at x.
  EvalReport finalize(const RowSums& sums, const Vector& x) const;
  RowSums sums(const Vector& x, bool want_hessian) const;

  // Gradient of row i's loss, without the regularizer.
  GlmGradient per_sample_gradient(std::size_t i, const Vector& x) const;

  // Upper bound on loss(0, z) over the rows.
  double phi_bound() const;
  // Row-norm bound on the gradient Lipschitz constant, regularizer included.
  double lipschitz_estimate() const;

 private:
  LossKind loss_;
  PrefixView view_;
  double nu_;
};

// Unregularized mean loss over every row (test risk).
double average_loss(LossKind kind, const Dataset& data, const Vector& x);

}  // namespace dyna
