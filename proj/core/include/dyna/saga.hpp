#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "dyna/cost.hpp"
#include "dyna/objective.hpp"

namespace dyna {

struct SagaConfig {
  int epochs = 30;
  std::uint64_t seed = 1;
  std::optional<double> step;  // defaults to 1 / (3 L)
  bool check_drift = true;     // recompute the running average every 10 n steps

  void validate() const;
};

// Scalar per-sample coefficients: the stored gradient of row i is coeff[i] * z_i.
struct SagaState {
  Vector x;
  std::vector<double> coeff;
  Vector avg_grad;  // (1/n) sum_i coeff[i] z_i
  double step = 0.0;
};

struct SagaResult {
  SagaState state;
  std::uint64_t steps = 0;
  bool stopped = false;
  double max_drift = 0.0;  // largest relative gap found by the drift check
  int drift_checks = 0;
};

// (1/n) sum_i coeff[i] z_i over the objective's rows.
Vector saga_average(const RegularizedObjective& obj, const std::vector<double>& coeff);

// Uniform sampling with replacement from a seeded mt19937_64. The regularizer
// gradient nu x is applied exactly at the current iterate in every step.
// The observer fires once per n steps.
SagaResult saga_run(const RegularizedObjective& obj, const Vector& x0, const SagaConfig& cfg,
                    EpochMeter* meter = nullptr, const IterateObserver& observer = {});

}  // namespace dyna
