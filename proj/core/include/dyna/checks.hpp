#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dyna {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

// Randomized invariant checks over small synthetic problems: derivative
// consistency, decrement identities, solver contracts and bookkeeping.
std::vector<CheckResult> run_property_checks(std::uint64_t seed = 1);

}  // namespace dyna
