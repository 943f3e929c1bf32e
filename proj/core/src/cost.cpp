#include "dyna/cost.hpp"

#include "dyna/error.hpp"

namespace dyna {

double effective_epoch_cost(const CostEvent& event, std::size_t total_samples) {
  if (total_samples == 0) throw Error("epoch accounting needs a positive sample count");
  return static_cast<double>(event.rows) / static_cast<double>(total_samples);
}

EpochMeter::EpochMeter(std::size_t total_samples) : total_(total_samples) {
  if (total_samples == 0) throw Error("epoch accounting needs a positive sample count");
}

void EpochMeter::charge(const CostEvent& event) { epochs_ += effective_epoch_cost(event, total_); }

}  // namespace dyna
