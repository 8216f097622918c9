#include "kkl/estimation.hpp"

#include <cmath>

#include <fmt/format.h>

#include "kkl/error.hpp"

namespace kkl {

namespace {

std::size_t first_index_at(const Trajectory& traj, double t_cutoff) {
  std::size_t k = 0;
  // Small slack so a cutoff on the grid (e.g. 25.0 vs 250 * 0.1) is included.
  while (k < traj.size() && traj.times[k] < t_cutoff - 1e-9 * traj.dt) ++k;
  return k;
}

void check_runs(const std::vector<EstimationRun>& runs) {
  if (runs.empty()) throw DomainError("metrics: no runs");
  const std::size_t n = runs.front().true_traj.size();
  for (const auto& r : runs) {
    if (r.true_traj.size() != n || r.est_traj.size() != n) {
      throw DimensionError("metrics: runs are not on a common time grid");
    }
  }
}

}  // namespace

Trajectory reconstruct_estimates(const MlpParams& eta, const Trajectory& z_traj) {
  Trajectory est;
  est.dt = z_traj.dt;
  est.times = z_traj.times;
  est.states.reserve(z_traj.size());
  for (const auto& z : z_traj.states) est.states.push_back(forward(eta, z));
  return est;
}

EstimationRun simulate_observer(const SystemModel& sys, const ObserverMatrices& obs,
                                const MlpParams& eta, const Vec& x0, const SimulateOptions& opts) {
  if (x0.size() != sys.n_x) throw DimensionError("simulate: x0 does not match n_x");
  if (eta.n_in() != obs.n_z || eta.n_out() != sys.n_x) {
    throw DimensionError(fmt::format("simulate: inverse map is {} -> {}, expected {} -> {}",
                                     eta.n_in(), eta.n_out(), obs.n_z, sys.n_x));
  }
  const Vec z0 = opts.z0.size() == 0 ? Vec::Zero(obs.n_z) : opts.z0;
  const Vec z_ref0 = opts.z_ref0.size() == 0 ? z0 : opts.z_ref0;
  if (z0.size() != obs.n_z || z_ref0.size() != obs.n_z) {
    throw DimensionError("simulate: filter initial state does not match n_z");
  }

  EstimationRun run;
  run.true_traj =
      integrate(perturbed_dynamics(sys, opts.noise), x0, opts.T, opts.dt, sys.substeps);
  const std::size_t n = run.true_traj.size();

  if (opts.noise.has_process_noise()) {
    for (std::size_t k = 0; k + 1 < n; ++k) {
      run.w_bar = std::max(run.w_bar, process_noise(opts.noise, sys.n_x, k).lpNorm<Eigen::Infinity>());
    }
    const Trajectory nominal = integrate(dynamics_field(sys), x0, opts.T, opts.dt, sys.substeps);
    for (const auto& x : nominal.states) run.y_clean.push_back(eval_output(sys, x));
  } else {
    for (const auto& x : run.true_traj.states) run.y_clean.push_back(eval_output(sys, x));
  }

  run.y_noisy.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const Vec v = measurement_noise(opts.noise, sys.n_y, k);
    run.v_bar = std::max(run.v_bar, v.lpNorm<Eigen::Infinity>());
    run.y_noisy.push_back(eval_output(sys, run.true_traj.states[k]) + v);
  }

  run.z_traj = integrate_driven(obs.A, obs.B, z0, run.y_noisy, opts.dt);
  run.z_ref = integrate_driven(obs.A, obs.B, z_ref0, run.y_clean, opts.dt);
  run.est_traj = reconstruct_estimates(eta, run.z_traj);
  return run;
}

double rmse(const std::vector<EstimationRun>& runs, double t_cutoff) {
  return compute_metrics(runs, t_cutoff).rmse;
}

double smape(const std::vector<EstimationRun>& runs, double t_cutoff) {
  return compute_metrics(runs, t_cutoff).smape;
}

MetricsReport compute_metrics(const std::vector<EstimationRun>& runs, double t_cutoff) {
  check_runs(runs);
  MetricsReport rep;
  rep.t_cutoff = t_cutoff;
  double sq_sum = 0.0;
  double sm_sum = 0.0;
  std::size_t sm_count = 0;
  for (const auto& run : runs) {
    const std::size_t k0 = first_index_at(run.true_traj, t_cutoff);
    double run_sq = 0.0, run_sm = 0.0;
    std::size_t run_n = 0, run_sm_n = 0;
    for (std::size_t k = k0; k < run.true_traj.size(); ++k) {
      const Vec& x = run.true_traj.states[k];
      const Vec& xh = run.est_traj.states[k];
      const double err = (x - xh).norm();
      run_sq += err * err;
      ++run_n;
      const double denom = x.norm() + xh.norm();
      if (denom > 0.0) {
        run_sm += 2.0 * err / denom;
        ++run_sm_n;
      } else {
        ++rep.degenerate_samples;
      }
    }
    if (run_n == 0) throw DomainError("metrics: no samples after the cutoff");
    sq_sum += run_sq;
    sm_sum += run_sm;
    rep.samples += run_n;
    sm_count += run_sm_n;
    rep.run_rmse.push_back(std::sqrt(run_sq / static_cast<double>(run_n)));
    rep.run_smape.push_back(run_sm_n > 0 ? 100.0 * run_sm / static_cast<double>(run_sm_n) : 0.0);
  }
  if (sm_count == 0) throw DomainError("metrics: every sample is degenerate for SMAPE");
  rep.rmse = std::sqrt(sq_sum / static_cast<double>(rep.samples));
  rep.smape = 100.0 * sm_sum / static_cast<double>(sm_count);
  return rep;
}

EnvelopeCheck z_error_envelope_check(const EstimationRun& run, const ObserverMatrices& obs,
                                     double ell_h, double psi_wbar, double vbar, double t_burn) {
  if (run.z_ref.size() != run.z_traj.size()) {
    throw DimensionError("envelope check: reference filter missing or misaligned");
  }
  const std::size_t k0 = first_index_at(run.z_traj, t_burn);
  if (k0 >= run.z_traj.size()) throw DomainError("envelope check: burn-in beyond horizon");

  const double lam = obs.lambda_min;
  const double drive = ell_h * psi_wbar + std::sqrt(static_cast<double>(obs.B.cols())) * vbar;
  const double gain = obs.cond_V / std::abs(lam) * obs.norm_B() * drive;
  const double e0 = (run.z_ref.states[k0] - run.z_traj.states[k0]).norm();

  EnvelopeCheck check;
  check.min_margin = std::numeric_limits<double>::infinity();
  for (std::size_t k = k0; k < run.z_traj.size(); ++k) {
    const double t = run.z_traj.times[k] - run.z_traj.times[k0];
    const double decay = std::exp(lam * t);
    const double bound = obs.cond_V * decay * e0 + gain * (1.0 - decay);
    const double err = (run.z_ref.states[k] - run.z_traj.states[k]).norm();
    const double margin = bound - err;
    check.errors.push_back(err);
    check.margins.push_back(margin);
    if (margin < check.min_margin) {
      check.min_margin = margin;
      check.worst_index = k;
    }
  }
  check.pass = check.min_margin >= 0.0;
  return check;
}

}  // namespace kkl
