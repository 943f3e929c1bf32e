#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include "dyna/dataset.hpp"
#include "dyna/objective.hpp"

namespace testing {

inline dyna::Vector gaussian(std::mt19937_64& rng, std::size_t d, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  dyna::Vector v(static_cast<Eigen::Index>(d));
  for (auto& e : v) e = g(rng);
  return v;
}

inline dyna::Matrix gaussian(std::mt19937_64& rng, std::size_t n, std::size_t d) {
  std::normal_distribution<double> g;
  dyna::Matrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
  return m;
}

// Dense Gaussian design with real-valued targets.
inline dyna::Dataset regression(std::mt19937_64& rng, std::size_t n, std::size_t d) {
  return dyna::Dataset::from_dense(gaussian(rng, n, d), gaussian(rng, n), dyna::LabelKind::Real);
}

inline dyna::RegularizedObjective whole(dyna::LossKind kind, const dyna::Dataset& data, double nu) {
  return {kind, dyna::prefix(data, data.size()), nu};
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("dyna-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline double relative(const dyna::Vector& got, const dyna::Vector& want) {
  return (got - want).norm() / std::max(want.norm(), 1e-300);
}

}  // namespace testing
