#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kkl/mlp.hpp"
#include "kkl/observer.hpp"
#include "kkl/systems.hpp"

namespace kkl {

struct Box {
  Vec lo;
  Vec hi;

  static Box symmetric(int dim, double half_width);
  int dim() const { return static_cast<int>(lo.size()); }
};

// Derives an independent sub-seed for a named stream.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

// count i.i.d. uniform points in the box, one per column.
Mat sample_box(std::size_t count, const Box& box, std::uint64_t seed);

struct S1Config {
  std::size_t p = 100;  // labeled trajectories
  std::size_t q = 100;  // collocation trajectories
  double T = 50.0;
  double dt = 0.1;
  double eps = 1e-4;
  // k* is never below ceil(fraction * tau).
  double min_truncation_fraction = 0.1;
  Box x_box;
  // Empty means: the largest cube on which every z0 satisfies the eps bound
  // by the minimum truncation time.
  Box z_box;
  std::uint64_t seed = 0;
};

// Columns are samples. Labeled pairs are stored trajectory by trajectory, each
// contributing samples k*, ..., tau.
struct DatasetS1 {
  Mat x_data;
  Mat z_data;
  Mat x_pde;
  Mat x0;  // labeled initial states, n_x x p
  Mat z0;  // filter initial states, n_z x p
  std::size_t p = 0;
  std::size_t q = 0;
  std::size_t tau = 0;  // last sample index, T / dt
  std::size_t k_star = 0;
  double t_star_max = 0.0;
  double dt = 0.0;

  std::size_t n_data() const { return static_cast<std::size_t>(x_data.cols()); }
  std::size_t n_pde() const { return static_cast<std::size_t>(x_pde.cols()); }
  std::size_t trajectory_of(std::size_t col) const;
  std::size_t sample_index_of(std::size_t col) const;
};

enum class S2Mode { IidPoints, Trajectories };
std::string to_string(S2Mode mode);
S2Mode s2_mode_from_string(const std::string& name);

struct DatasetS2 {
  Mat z;  // n_z x N2
  Mat x;  // n_x x N2

  std::size_t size() const { return static_cast<std::size_t>(x.cols()); }
};

// Half-width of the z0 cube for which t*(eps, z0) <= t_limit for all z0.
double auto_z_half_width(const ObserverMatrices& obs, double eps, double t_limit);

DatasetS1 generate_s1(const SystemModel& sys, const ObserverMatrices& obs, const S1Config& cfg);

struct S2Config {
  std::size_t n2 = 0;
  Box x_box;
  S2Mode mode = S2Mode::IidPoints;
  double dt = 0.1;
  double T = 50.0;
  std::uint64_t seed = 0;
};

DatasetS2 generate_s2(const MlpParams& theta, const SystemModel& sys, const S2Config& cfg);

// Componentwise bounding box of the columns of the given matrices.
Box bounding_box(const std::vector<const Mat*>& points);

}  // namespace kkl
