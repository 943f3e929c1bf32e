#include "dyna/objective.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "dyna/error.hpp"

namespace dyna {

const char* to_string(LossKind kind) noexcept {
  return kind == LossKind::Logistic ? "logistic" : "quadratic";
}

LossKind loss_from_string(std::string_view name) {
  if (name == "logistic") return LossKind::Logistic;
  if (name == "quadratic") return LossKind::Quadratic;
  throw Error(fmt::format("unknown loss '{}'", name));
}

namespace loss {
namespace {

// sigmoid(s) = 1 / (1 + exp(-s)) without overflow
double sigmoid(double s) noexcept {
  if (s >= 0.0) return 1.0 / (1.0 + std::exp(-s));
  const double e = std::exp(s);
  return e / (1.0 + e);
}

}  // namespace

double value(LossKind kind, double t, double y) noexcept {
  if (kind == LossKind::Quadratic) return 0.5 * (t - y) * (t - y);
  // log(1 + exp(-s)) branching on the sign of s
  const double s = y * t;
  if (s > 0.0) return std::log1p(std::exp(-s));
  return -s + std::log1p(std::exp(s));
}

double derivative(LossKind kind, double t, double y) noexcept {
  if (kind == LossKind::Quadratic) return t - y;
  return -y * sigmoid(-y * t);
}

double curvature(LossKind kind, double t, double y) noexcept {
  if (kind == LossKind::Quadratic) return 1.0;
  const double s = y * t;
  return sigmoid(s) * sigmoid(-s);
}

}  // namespace loss

RowSums RowSums::zero(std::size_t dim, bool with_hessian) {
  RowSums out;
  const auto d = static_cast<Eigen::Index>(dim);
  out.gradient = Vector::Zero(d);
  if (with_hessian) out.hessian = Matrix::Zero(d, d);
  out.has_hessian = with_hessian;
  return out;
}

RowSums& RowSums::operator+=(const RowSums& other) {
  count += other.count;
  loss += other.loss;
  gradient += other.gradient;
  if (has_hessian) {
    if (!other.has_hessian) throw Error("adding row sums without a Hessian to sums with one");
    hessian += other.hessian;
  }
  return *this;
}

RowSums accumulate_rows(LossKind kind, const Dataset& data, std::size_t begin, std::size_t end,
                        const Vector& x, bool want_hessian) {
  if (begin > end || end > data.size())
    throw Error(fmt::format("row range [{}, {}) outside dataset of {}", begin, end, data.size()));
  RowSums out = RowSums::zero(data.dim(), want_hessian);
  out.count = end - begin;
  for (std::size_t i = begin; i < end; ++i) {
    const SparseRow row = data.row(i);
    const double y = data.label(i);
    const double t = row.dot(x);
    out.loss += loss::value(kind, t, y);
    row.axpy(loss::derivative(kind, t, y), out.gradient);
    if (want_hessian) {
      const double c = loss::curvature(kind, t, y);
      const auto nnz = row.nnz();
      for (std::size_t b = 0; b < nnz; ++b) {
        const double cb = c * row.values[b];
        double* column = out.hessian.col(row.indices[b]).data();
        for (std::size_t a = 0; a <= b; ++a) column[row.indices[a]] += cb * row.values[a];
      }
    }
  }
  return out;
}

Vector GlmGradient::dense(std::size_t dim) const {
  Vector out = Vector::Zero(static_cast<Eigen::Index>(dim));
  row.axpy(coefficient, out);
  return out;
}

RegularizedObjective::RegularizedObjective(LossKind loss, PrefixView view, double nu)
    : loss_(loss), view_(view), nu_(nu) {
  if (!(nu >= 0.0) || !std::isfinite(nu)) throw Error(fmt::format("regularization {} must be >= 0", nu));
}

RegularizedObjective RegularizedObjective::with(std::size_t n, double nu) const {
  return RegularizedObjective(loss_, prefix(dataset(), n), nu);
}

RowSums RegularizedObjective::sums(const Vector& x, bool want_hessian) const {
  if (static_cast<std::size_t>(x.size()) != dim())
    throw Error(fmt::format("point has length {}, objective dim is {}", x.size(), dim()));
  return accumulate_rows(loss_, dataset(), 0, size(), x, want_hessian);
}

EvalReport RegularizedObjective::finalize(const RowSums& sums, const Vector& x) const {
  if (sums.count != size())
    throw Error(fmt::format("row sums cover {} rows, objective has {}", sums.count, size()));
  const double inv_n = 1.0 / static_cast<double>(size());
  EvalReport out;
  out.value = inv_n * sums.loss + 0.5 * nu_ * x.squaredNorm();
  out.gradient = inv_n * sums.gradient + nu_ * x;
  if (sums.has_hessian) {
    Matrix h = inv_n * sums.hessian.selfadjointView<Eigen::Upper>().toDenseMatrix();
    h.diagonal().array() += nu_;
    out.hessian = std::move(h);
  }
  return out;
}

EvalReport RegularizedObjective::evaluate(const Vector& x, bool want_hessian) const {
  return finalize(sums(x, want_hessian), x);
}

double RegularizedObjective::value(const Vector& x) const {
  double acc = 0.0;
  for (std::size_t i = 0; i < size(); ++i) acc += loss::value(loss_, view_.row(i).dot(x), view_.label(i));
  return acc / static_cast<double>(size()) + 0.5 * nu_ * x.squaredNorm();
}

GlmGradient RegularizedObjective::per_sample_gradient(std::size_t i, const Vector& x) const {
  if (i >= size()) throw Error(fmt::format("row {} outside prefix of {}", i, size()));
  const SparseRow row = view_.row(i);
  return {loss::derivative(loss_, row.dot(x), view_.label(i)), row};
}

double RegularizedObjective::phi_bound() const {
  if (loss_ == LossKind::Logistic) return std::numbers::ln2;
  double bound = 0.0;
  for (std::size_t i = 0; i < size(); ++i) bound = std::max(bound, 0.5 * view_.label(i) * view_.label(i));
  return bound;
}

double RegularizedObjective::lipschitz_estimate() const {
  double max_sq = 0.0;
  for (std::size_t i = 0; i < size(); ++i) max_sq = std::max(max_sq, view_.row(i).squared_norm());
  const double scale = loss_ == LossKind::Logistic ? 0.25 : 1.0;
  return scale * max_sq + nu_;
}

double average_loss(LossKind kind, const Dataset& data, const Vector& x) {
  if (data.size() == 0) throw Error("average loss of an empty dataset");
  double acc = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) acc += loss::value(kind, data.row(i).dot(x), data.label(i));
  return acc / static_cast<double>(data.size());
}

}  // namespace dyna
