#include <benchmark/benchmark.h>

#include "dyna/dataset.hpp"
#include "dyna/linalg.hpp"
#include "dyna/objective.hpp"

namespace {

// Sparse rows of the same shape as the small benchmark sets.
const dyna::Dataset& sparse_data() {
  static const dyna::Dataset data = dyna::synthesize_sparse_binary({.n = 30000, .d = 123, .mean_nnz = 14, .seed = 1});
  return data;
}

void BM_Evaluate(benchmark::State& state) {
  const auto& data = sparse_data();
  const auto n = static_cast<std::size_t>(state.range(0));
  const bool hessian = state.range(1) != 0;
  const dyna::RegularizedObjective obj(dyna::LossKind::Logistic, dyna::prefix(data, n), 1.0 / n);
  const dyna::Vector x = dyna::Vector::Constant(static_cast<Eigen::Index>(data.dim()), 0.01);
  for (auto _ : state) benchmark::DoNotOptimize(obj.evaluate(x, hessian));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_Evaluate)->ArgsProduct({{1000, 10000, 30000}, {0, 1}})->Unit(benchmark::kMicrosecond);

void BM_FactorSpd(benchmark::State& state) {
  const auto d = state.range(0);
  const dyna::Matrix a = dyna::Matrix::Random(d, d);
  const dyna::Matrix h = a * a.transpose() + dyna::Matrix::Identity(d, d);
  const dyna::Vector g = dyna::Vector::Ones(d);
  for (auto _ : state) {
    const auto f = dyna::factor_spd(h);
    benchmark::DoNotOptimize(f.quad_form_inv(g));
  }
}
BENCHMARK(BM_FactorSpd)->Arg(20)->Arg(123)->Arg(300)->Unit(benchmark::kMicrosecond);

}  // namespace
