#include <benchmark/benchmark.h>

#include "dyna/continuation.hpp"
#include "dyna/newton.hpp"

namespace {

const dyna::Dataset& sparse_data() {
  static const dyna::Dataset data = dyna::synthesize_sparse_binary({.n = 30000, .d = 123, .mean_nnz = 14, .seed = 1});
  return data;
}

void BM_NewtonStep(benchmark::State& state) {
  const auto& data = sparse_data();
  const auto n = static_cast<std::size_t>(state.range(0));
  const dyna::RegularizedObjective obj(dyna::LossKind::Logistic, dyna::prefix(data, n), 1.0 / n);
  const dyna::Vector x = dyna::Vector::Zero(static_cast<Eigen::Index>(data.dim()));
  for (auto _ : state) benchmark::DoNotOptimize(dyna::newton_step(obj, x, {}));
}
BENCHMARK(BM_NewtonStep)->Arg(1000)->Arg(30000)->Unit(benchmark::kMillisecond);

// One growth decision from a solved prefix: gradient scan over new rows plus
// a Taylor estimate per grid candidate.
void BM_GrowthScan(benchmark::State& state) {
  const auto& data = sparse_data();
  const std::size_t m = static_cast<std::size_t>(state.range(0));
  const double mu = 1.0 / static_cast<double>(m);
  const dyna::RegularizedObjective obj(dyna::LossKind::Logistic, dyna::prefix(data, m), mu);
  dyna::NewtonConfig cfg;
  const dyna::NewtonResult solved = dyna::minimize(obj, dyna::Vector::Zero(static_cast<Eigen::Index>(data.dim())), cfg);
  const auto& dir = *solved.final_direction;
  const dyna::ContinuationConfig ccfg;
  for (auto _ : state) {
    dyna::GradientCache cache(dyna::LossKind::Logistic, data, solved.x(), m, false, nullptr);
    const dyna::GrowthState gs{.current = obj, .x = solved.x(), .factorization = &dir.factorization,
                               .residual = &dir.eval.gradient, .cache = cache, .coupling = mu * m};
    benchmark::DoNotOptimize(dyna::find_growth(gs, ccfg, data.size()));
  }
}
BENCHMARK(BM_GrowthScan)->Arg(500)->Arg(4000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
