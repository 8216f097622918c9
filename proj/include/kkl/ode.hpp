#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <vector>

#include <Eigen/Dense>

namespace kkl {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Autonomous vector field x -> f(x).
using VectorField = std::function<Vec(const Vec&)>;

// Vector field whose value may depend on the integration step index, e.g. a
// process disturbance held constant over each step.
using StepField = std::function<Vec(std::size_t step, const Vec&)>;

// Uniformly sampled solution: times[k] = k * dt, states[k] = x(t_k).
struct Trajectory {
  double dt = 0.0;
  std::vector<double> times;
  std::vector<Vec> states;

  std::size_t size() const { return states.size(); }
  Eigen::Index dim() const { return states.empty() ? 0 : states.front().size(); }
};

bool all_finite(const Vec& v);

// One classical Runge-Kutta step. `step` is only used to name the step in a
// divergence error.
Vec rk4_step(const VectorField& f, const Vec& x, double dt, std::size_t step = 0);

// floor(t_end / dt) + 1 samples starting at x0. Each sample interval is
// covered by `substeps` RK4 steps of size dt / substeps; a StepField sees the
// sample index, so step-held disturbances stay constant across substeps.
Trajectory integrate(const VectorField& f, const Vec& x0, double t_end, double dt,
                     int substeps = 1);
Trajectory integrate(const StepField& f, const Vec& x0, double t_end, double dt,
                     int substeps = 1);

// dz/dt = A z + B u, u held constant over [t_k, t_k + dt) at u[k].
// Produces u.size() samples when `steps` is omitted, i.e. the trajectory is
// aligned with the input signal grid.
Trajectory integrate_driven(const Mat& A, const Mat& B, const Vec& z0,
                            const std::vector<Vec>& u, double dt);
Trajectory integrate_driven(const Mat& A, const Mat& B, const Vec& z0,
                            const std::vector<Vec>& u, double dt, std::size_t steps);

// Number of samples integrate() produces on [0, t_end].
std::size_t sample_count(double t_end, double dt);

// Header `t,x1,...,xn`, 17 significant digits.
void write_trajectory_csv(std::ostream& out, const Trajectory& traj);

}  // namespace kkl
