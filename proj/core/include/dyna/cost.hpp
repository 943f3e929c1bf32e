#pragma once

#include <cstddef>
#include <functional>
#include <optional>

#include "dyna/dataset.hpp"

namespace dyna {

// Every event is a pass over some number of rows; the cost is rows / N, where
// N is the full training-set size. A Newton evaluation computes value,
// gradient and Hessian in one fused pass, and so does each line-search trial,
// so an accepted trial doubles as the next iteration's evaluation.
enum class CostKind {
  Evaluation,          // value + gradient (+ Hessian) on n rows
  LineSearchTrial,     // one backtracking trial on n rows
  GradientEvaluation,  // value + gradient on n rows (quasi-Newton)
  GrowthScan,          // per-sample work on rows m+1..n when choosing the next stage
  SagaStep,            // one stochastic step touches one row
};

struct CostEvent {
  CostKind kind;
  std::size_t rows;
};

double effective_epoch_cost(const CostEvent& event, std::size_t total_samples);

class EpochMeter {
 public:
  explicit EpochMeter(std::size_t total_samples);

  void charge(const CostEvent& event);
  double epochs() const noexcept { return epochs_; }
  std::size_t total_samples() const noexcept { return total_; }

 private:
  std::size_t total_;
  double epochs_ = 0.0;
};

inline void charge(EpochMeter* meter, CostKind kind, std::size_t rows) {
  if (meter != nullptr) meter->charge({kind, rows});
}

// Snapshot handed to observers after every accepted iterate.
struct IterateInfo {
  const Vector& x;
  double epochs;
  std::optional<double> lambda;
  std::optional<int> stage;
};

// Returning false asks the solver to stop; it then returns what it has, flagged as stopped.
using IterateObserver = std::function<bool(const IterateInfo&)>;

inline bool notify(const IterateObserver& observer, const IterateInfo& info) {
  return !observer || observer(info);
}

}  // namespace dyna
