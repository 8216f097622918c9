#include "kkl/ode.hpp"

#include <cmath>
#include <ostream>

#include <fmt/format.h>

#include "kkl/error.hpp"

namespace kkl {

namespace {

void check_stage(const Vec& v, std::size_t step) {
  if (!all_finite(v)) {
    throw DivergenceError(fmt::format("integration diverged at time step {}", step));
  }
}

Vec rk4_stage_step(const StepField& f, const Vec& x, double dt, std::size_t step) {
  const Vec k1 = f(step, x);
  check_stage(k1, step);
  const Vec k2 = f(step, x + 0.5 * dt * k1);
  check_stage(k2, step);
  const Vec k3 = f(step, x + 0.5 * dt * k2);
  check_stage(k3, step);
  const Vec k4 = f(step, x + dt * k3);
  check_stage(k4, step);
  Vec next = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  check_stage(next, step);
  return next;
}

void validate_step(double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) {
    throw DomainError(fmt::format("time step must be positive, got {}", dt));
  }
}

}  // namespace

bool all_finite(const Vec& v) { return v.allFinite(); }

std::size_t sample_count(double t_end, double dt) {
  validate_step(dt);
  if (!(t_end >= dt)) {
    throw DomainError(fmt::format("horizon {} shorter than one step {}", t_end, dt));
  }
  // Tolerate representation error in t_end / dt (e.g. 50 / 0.1).
  return static_cast<std::size_t>(std::floor(t_end / dt + 1e-9)) + 1;
}

Vec rk4_step(const VectorField& f, const Vec& x, double dt, std::size_t step) {
  validate_step(dt);
  return rk4_stage_step([&f](std::size_t, const Vec& v) { return f(v); }, x, dt, step);
}

Trajectory integrate(const StepField& f, const Vec& x0, double t_end, double dt, int substeps) {
  const std::size_t n = sample_count(t_end, dt);
  if (substeps < 1) throw DomainError(fmt::format("substeps must be >= 1, got {}", substeps));
  const double h = dt / substeps;
  if (!all_finite(x0)) throw DivergenceError("initial state is not finite");
  Trajectory traj;
  traj.dt = dt;
  traj.times.reserve(n);
  traj.states.reserve(n);
  traj.times.push_back(0.0);
  traj.states.push_back(x0);
  for (std::size_t k = 0; k + 1 < n; ++k) {
    Vec x = traj.states.back();
    for (int s = 0; s < substeps; ++s) x = rk4_stage_step(f, x, h, k);
    traj.states.push_back(std::move(x));
    traj.times.push_back(static_cast<double>(k + 1) * dt);
  }
  return traj;
}

Trajectory integrate(const VectorField& f, const Vec& x0, double t_end, double dt, int substeps) {
  return integrate(StepField([&f](std::size_t, const Vec& v) { return f(v); }), x0, t_end, dt,
                   substeps);
}

Trajectory integrate_driven(const Mat& A, const Mat& B, const Vec& z0,
                            const std::vector<Vec>& u, double dt, std::size_t steps) {
  validate_step(dt);
  if (A.rows() != A.cols() || A.rows() != z0.size() || B.rows() != A.rows()) {
    throw DimensionError(fmt::format("incompatible filter dimensions: A {}x{}, B {}x{}, z0 {}",
                                     A.rows(), A.cols(), B.rows(), B.cols(), z0.size()));
  }
  if (u.size() < steps) {
    throw DimensionError(
        fmt::format("input signal has {} samples, {} steps requested", u.size(), steps));
  }
  for (std::size_t k = 0; k < steps; ++k) {
    if (u[k].size() != B.cols()) {
      throw DimensionError(fmt::format("input sample {} has dimension {}, expected {}", k,
                                       u[k].size(), B.cols()));
    }
  }

  Trajectory traj;
  traj.dt = dt;
  traj.times.reserve(steps + 1);
  traj.states.reserve(steps + 1);
  traj.times.push_back(0.0);
  traj.states.push_back(z0);
  Vec forcing(A.rows());
  const StepField field = [&](std::size_t k, const Vec& z) -> Vec {
    (void)k;
    return A * z + forcing;
  };
  for (std::size_t k = 0; k < steps; ++k) {
    forcing.noalias() = B * u[k];
    traj.states.push_back(rk4_stage_step(field, traj.states.back(), dt, k));
    traj.times.push_back(static_cast<double>(k + 1) * dt);
  }
  return traj;
}

Trajectory integrate_driven(const Mat& A, const Mat& B, const Vec& z0,
                            const std::vector<Vec>& u, double dt) {
  if (u.empty()) throw DimensionError("empty input signal");
  return integrate_driven(A, B, z0, u, dt, u.size() - 1);
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
  out << "t";
  for (Eigen::Index i = 0; i < traj.dim(); ++i) out << ",x" << (i + 1);
  out << '\n';
  for (std::size_t k = 0; k < traj.size(); ++k) {
    out << fmt::format("{:.17g}", traj.times[k]);
    for (Eigen::Index i = 0; i < traj.states[k].size(); ++i) {
      out << fmt::format(",{:.17g}", traj.states[k][i]);
    }
    out << '\n';
  }
}

}  // namespace kkl
