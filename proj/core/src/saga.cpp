#include "dyna/saga.hpp"

#include <algorithm>
#include <random>

#include <fmt/format.h>

#include "dyna/error.hpp"

namespace dyna {

void SagaConfig::validate() const {
  if (epochs < 0) throw Error("SAGA epochs must be non-negative");
  if (step && !(*step > 0.0)) throw Error(fmt::format("SAGA step {} must be positive", *step));
}

Vector saga_average(const RegularizedObjective& obj, const std::vector<double>& coeff) {
  Vector avg = Vector::Zero(static_cast<Eigen::Index>(obj.dim()));
  const Dataset& data = obj.dataset();
  for (std::size_t i = 0; i < obj.size(); ++i) data.row(i).axpy(coeff[i], avg);
  return avg / static_cast<double>(obj.size());
}

SagaResult saga_run(const RegularizedObjective& obj, const Vector& x0, const SagaConfig& cfg,
                    EpochMeter* meter, const IterateObserver& observer) {
  cfg.validate();
  if (!(obj.nu() > 0.0)) throw Error("SAGA needs nu > 0");
  if (static_cast<std::size_t>(x0.size()) != obj.dim())
    throw Error(fmt::format("x0 has dimension {}, objective {}", x0.size(), obj.dim()));

  const std::size_t n = obj.size();
  const Dataset& data = obj.dataset();
  const double nu = obj.nu();
  const double inv_n = 1.0 / static_cast<double>(n);

  SagaResult out;
  SagaState& st = out.state;
  st.x = x0;
  st.coeff.assign(n, 0.0);
  st.avg_grad = Vector::Zero(x0.size());
  st.step = cfg.step.value_or(1.0 / (3.0 * obj.lipschitz_estimate()));

  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  const std::uint64_t check_every = 10 * static_cast<std::uint64_t>(n);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t k = 0; k < n; ++k) {
      const std::size_t i = pick(rng);
      const SparseRow row = data.row(i);
      const double c = loss::derivative(obj.loss(), row.dot(st.x), data.label(i));
      const double delta = c - st.coeff[i];
      // x <- x - step * (delta z_i + avg + nu x); avg is read before its update.
      st.x *= 1.0 - st.step * nu;
      st.x -= st.step * st.avg_grad;
      row.axpy(-st.step * delta, st.x);
      row.axpy(delta * inv_n, st.avg_grad);
      st.coeff[i] = c;
      ++out.steps;

      if (cfg.check_drift && out.steps % check_every == 0) {
        const Vector exact = saga_average(obj, st.coeff);
        const double scale = std::max(exact.norm(), 1e-300);
        out.max_drift = std::max(out.max_drift, (st.avg_grad - exact).norm() / scale);
        ++out.drift_checks;
        st.avg_grad = exact;
      }
    }
    charge(meter, CostKind::SagaStep, n);
    if (!notify(observer, {st.x, meter != nullptr ? meter->epochs() : 0.0, std::nullopt, std::nullopt})) {
      out.stopped = true;
      break;
    }
  }
  return out;
}

}  // namespace dyna
