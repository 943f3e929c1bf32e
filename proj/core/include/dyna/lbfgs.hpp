#pragma once

#include <cstddef>
#include <deque>
#include <string_view>
#include <utility>

#include "dyna/continuation.hpp"
#include "dyna/cost.hpp"
#include "dyna/objective.hpp"

namespace dyna {

// Ring buffer of curvature pairs (s, y) for the limited-memory inverse Hessian.
class LbfgsMemory {
 public:
  explicit LbfgsMemory(std::size_t capacity = 10);

  // Stores the pair unless <s, y> <= 1e-12 |s| |y|. Returns whether it was kept.
  bool push(const Vector& s, const Vector& y);
  void clear();  // drops the pairs, keeps the counters

  std::size_t size() const noexcept { return pairs_.size(); }
  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t accepted() const noexcept { return accepted_; }
  std::size_t skipped() const noexcept { return skipped_; }
  // <s, y> / <y, y> of the newest pair; 1 when empty.
  double gamma() const noexcept;

  const std::deque<std::pair<Vector, Vector>>& pairs() const noexcept { return pairs_; }

 private:
  std::size_t capacity_;
  std::deque<std::pair<Vector, Vector>> pairs_;  // oldest first
  std::size_t accepted_ = 0;
  std::size_t skipped_ = 0;
};

// -H^{-1} g by the two-loop recursion, initial scaling gamma I.
Vector two_loop_direction(const LbfgsMemory& memory, const Vector& g);

struct LbfgsConfig {
  std::size_t memory = 10;
  double ls_alpha = 0.1;
  double ls_beta = 0.5;
  double grad_tol = 1e-8;  // stop once |grad| <= grad_tol
  int max_iters = 2000;
  int max_halvings = 60;

  void validate() const;
};

struct LbfgsResult {
  Vector x;
  bool converged = false;
  bool stalled = false;
  bool stopped = false;
  int iterations = 0;
  double grad_norm = 0.0;
  std::size_t accepted_pairs = 0;
  std::size_t skipped_pairs = 0;
};

LbfgsResult lbfgs_minimize(const RegularizedObjective& obj, const Vector& x0, const LbfgsConfig& cfg,
                           EpochMeter* meter = nullptr, const IterateObserver& observer = {});

enum class GrowthTest {
  GradientNorm,  // |grad f^alpha(x)| <= eta sqrt(nu)
  QuasiNewton,   // the decrement estimate with the L-BFGS inverse in place of H^{-1}
};

const char* to_string(GrowthTest test) noexcept;
GrowthTest growth_test_from_string(std::string_view name);

struct DynaLbfgsConfig {
  int stage_iters = 1;  // quasi-Newton increments per intermediate stage
  GrowthTest growth = GrowthTest::QuasiNewton;
};

struct DynaLbfgsResult {
  ContinuationResult continuation;
  std::size_t accepted_pairs = 0;
  std::size_t skipped_pairs = 0;
};

// The continuation driver with quasi-Newton increments; memory persists across
// stages. StageRecord::lambda_handover holds the bound |grad f_t| / sqrt(nu_t)
// at the stage start, not the exact decrement.
DynaLbfgsResult dyna_lbfgs(const Dataset& train, LossKind loss, const ContinuationConfig& cfg,
                           const LbfgsConfig& lbfgs, const DynaLbfgsConfig& inner, const Vector& x0,
                           EpochMeter* meter = nullptr, const IterateObserver& observer = {});

}  // namespace dyna
