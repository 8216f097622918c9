#include "kkl/datagen.hpp"

#include <cmath>
#include <random>

#include <fmt/format.h>

#include "kkl/error.hpp"
#include "kkl/parallel.hpp"

namespace kkl {

namespace {

constexpr std::uint64_t kStreamX0 = 11;
constexpr std::uint64_t kStreamZ0 = 12;
constexpr std::uint64_t kStreamPde = 13;
constexpr std::uint64_t kStreamS2 = 14;

std::vector<Vec> outputs_of(const SystemModel& sys, const Trajectory& traj) {
  std::vector<Vec> y;
  y.reserve(traj.size());
  for (const auto& x : traj.states) y.push_back(eval_output(sys, x));
  return y;
}

}  // namespace

Box Box::symmetric(int dim, double half_width) {
  return Box{Vec::Constant(dim, -half_width), Vec::Constant(dim, half_width)};
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Mat sample_box(std::size_t count, const Box& box, std::uint64_t seed) {
  if (box.lo.size() != box.hi.size() || box.lo.size() == 0) {
    throw DimensionError("sample box bounds must have equal nonzero dimension");
  }
  for (Eigen::Index i = 0; i < box.lo.size(); ++i) {
    if (!(box.lo[i] < box.hi[i])) {
      throw DomainError(fmt::format("degenerate sample box in coordinate {}: [{}, {}]", i,
                                    box.lo[i], box.hi[i]));
    }
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Mat pts(box.lo.size(), static_cast<Eigen::Index>(count));
  for (Eigen::Index c = 0; c < pts.cols(); ++c) {
    for (Eigen::Index i = 0; i < pts.rows(); ++i) {
      pts(i, c) = box.lo[i] + (box.hi[i] - box.lo[i]) * unit(rng);
    }
  }
  return pts;
}

std::size_t DatasetS1::trajectory_of(std::size_t col) const { return col / (tau - k_star + 1); }

std::size_t DatasetS1::sample_index_of(std::size_t col) const {
  return k_star + col % (tau - k_star + 1);
}

std::string to_string(S2Mode mode) {
  return mode == S2Mode::IidPoints ? "iid_points" : "trajectories";
}

S2Mode s2_mode_from_string(const std::string& name) {
  if (name == "iid_points") return S2Mode::IidPoints;
  if (name == "trajectories") return S2Mode::Trajectories;
  throw ConfigError(fmt::format("unknown S2 mode '{}' (iid_points | trajectories)", name));
}

double auto_z_half_width(const ObserverMatrices& obs, double eps, double t_limit) {
  // ||z0|| <= h sqrt(n_z) on the cube; solve t*(eps, h sqrt(n_z)) = t_limit and
  // back off 1% so the corners stay strictly inside the bound.
  const double max_norm = eps * std::exp(-obs.lambda_min * t_limit) / obs.cond_V;
  return 0.99 * max_norm / std::sqrt(static_cast<double>(obs.n_z));
}

DatasetS1 generate_s1(const SystemModel& sys, const ObserverMatrices& obs, const S1Config& cfg) {
  if (cfg.p == 0) throw ConfigError("datagen: p must be positive");
  if (cfg.x_box.dim() != sys.n_x) {
    throw DimensionError(fmt::format("datagen: x box has dimension {}, system has {}",
                                     cfg.x_box.dim(), sys.n_x));
  }
  if (obs.B.cols() != sys.n_y) throw DimensionError("datagen: observer B does not match n_y");

  DatasetS1 ds;
  ds.p = cfg.p;
  ds.q = cfg.q;
  ds.dt = cfg.dt;
  const std::size_t samples = sample_count(cfg.T, cfg.dt);
  ds.tau = samples - 1;

  const std::size_t k_floor = static_cast<std::size_t>(
      std::ceil(cfg.min_truncation_fraction * static_cast<double>(ds.tau) - 1e-9));
  Box z_box = cfg.z_box;
  if (z_box.dim() == 0) {
    z_box = Box::symmetric(obs.n_z,
                           auto_z_half_width(obs, cfg.eps, static_cast<double>(k_floor) * cfg.dt));
  } else if (z_box.dim() != obs.n_z) {
    throw DimensionError("datagen: z box dimension does not match n_z");
  }

  ds.x0 = sample_box(cfg.p, cfg.x_box, derive_seed(cfg.seed, kStreamX0));
  ds.z0 = sample_box(cfg.p, z_box, derive_seed(cfg.seed, kStreamZ0));

  ds.t_star_max = 0.0;
  for (Eigen::Index i = 0; i < ds.z0.cols(); ++i) {
    ds.t_star_max = std::max(
        ds.t_star_max, truncation_time(cfg.eps, ds.z0.col(i).norm(), obs.cond_V, obs.lambda_min));
  }
  ds.k_star = std::max(truncation_index(ds.t_star_max, cfg.dt), k_floor);
  if (ds.k_star + 1 > ds.tau) {
    throw ConfigError(fmt::format(
        "datagen: horizon too short for truncation (tau = {}, k* = {}); increase T", ds.tau,
        ds.k_star));
  }

  const std::size_t kept = ds.tau - ds.k_star + 1;
  ds.x_data.resize(sys.n_x, static_cast<Eigen::Index>(cfg.p * kept));
  ds.z_data.resize(obs.n_z, static_cast<Eigen::Index>(cfg.p * kept));
  const StepField plant = perturbed_dynamics(sys, NoiseSpec{});

  parallel_for(cfg.p, [&](std::size_t i) {
    const Trajectory xs = integrate(plant, ds.x0.col(static_cast<Eigen::Index>(i)), cfg.T,
                                    cfg.dt, sys.substeps);
    const Trajectory zs = integrate_driven(obs.A, obs.B, ds.z0.col(static_cast<Eigen::Index>(i)),
                                           outputs_of(sys, xs), cfg.dt);
    for (std::size_t k = ds.k_star; k <= ds.tau; ++k) {
      const auto col = static_cast<Eigen::Index>(i * kept + (k - ds.k_star));
      ds.x_data.col(col) = xs.states[k];
      ds.z_data.col(col) = zs.states[k];
    }
  });

  const Mat pde_x0 = cfg.q > 0 ? sample_box(cfg.q, cfg.x_box, derive_seed(cfg.seed, kStreamPde))
                               : Mat(sys.n_x, 0);
  ds.x_pde.resize(sys.n_x, static_cast<Eigen::Index>(cfg.q * ds.tau));
  parallel_for(cfg.q, [&](std::size_t j) {
    const Trajectory xs = integrate(plant, pde_x0.col(static_cast<Eigen::Index>(j)), cfg.T,
                                    cfg.dt, sys.substeps);
    for (std::size_t k = 1; k <= ds.tau; ++k) {
      ds.x_pde.col(static_cast<Eigen::Index>(j * ds.tau + k - 1)) = xs.states[k];
    }
  });
  return ds;
}

DatasetS2 generate_s2(const MlpParams& theta, const SystemModel& sys, const S2Config& cfg) {
  if (theta.n_in() != sys.n_x) throw DimensionError("S2: forward map input does not match n_x");
  DatasetS2 ds;
  if (cfg.n2 == 0) {
    ds.x.resize(sys.n_x, 0);
    ds.z.resize(theta.n_out(), 0);
    return ds;
  }
  if (cfg.mode == S2Mode::IidPoints) {
    ds.x = sample_box(cfg.n2, cfg.x_box, derive_seed(cfg.seed, kStreamS2));
  } else {
    const std::size_t per_traj = sample_count(cfg.T, cfg.dt);
    const std::size_t n_traj = (cfg.n2 + per_traj - 1) / per_traj;
    const Mat x0 = sample_box(n_traj, cfg.x_box, derive_seed(cfg.seed, kStreamS2));
    ds.x.resize(sys.n_x, static_cast<Eigen::Index>(cfg.n2));
    const StepField plant = perturbed_dynamics(sys, NoiseSpec{});
    parallel_for(n_traj, [&](std::size_t j) {
      const Trajectory xs =
          integrate(plant, x0.col(static_cast<Eigen::Index>(j)), cfg.T, cfg.dt, sys.substeps);
      for (std::size_t k = 0; k < per_traj; ++k) {
        const std::size_t col = j * per_traj + k;
        if (col < cfg.n2) ds.x.col(static_cast<Eigen::Index>(col)) = xs.states[k];
      }
    });
  }
  ds.z.resize(theta.n_out(), ds.x.cols());
  parallel_for(static_cast<std::size_t>(ds.x.cols()), [&](std::size_t j) {
    const auto c = static_cast<Eigen::Index>(j);
    ds.z.col(c) = forward(theta, ds.x.col(c));
  });
  return ds;
}

Box bounding_box(const std::vector<const Mat*>& points) {
  Box box;
  for (const Mat* m : points) {
    if (m == nullptr || m->cols() == 0) continue;
    const Vec lo = m->rowwise().minCoeff();
    const Vec hi = m->rowwise().maxCoeff();
    if (box.dim() == 0) {
      box.lo = lo;
      box.hi = hi;
    } else {
      box.lo = box.lo.cwiseMin(lo);
      box.hi = box.hi.cwiseMax(hi);
    }
  }
  if (box.dim() == 0) throw DimensionError("bounding box of an empty point set");
  return box;
}

}  // namespace kkl
