#pragma once

#include <filesystem>
#include <random>

#include "kkl/mlp.hpp"

namespace kkl::test {

inline Mat random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  Mat m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = u(rng);
  }
  return m;
}

// Random net with nonzero biases so every code path sees them.
inline MlpParams random_net(const std::vector<int>& sizes, std::uint64_t seed) {
  MlpParams p = init_params(sizes, seed);
  for (std::size_t l = 0; l < p.num_layers(); ++l) {
    p.biases[l] = random_matrix(p.biases[l].size(), 1, seed + 101 * (l + 1), 0.3);
  }
  return p;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("kkl_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline double max_rel_error(const Vec& a, const Vec& b, double floor = 1e-8) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double scale = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
  }
  return worst;
}

}  // namespace kkl::test
