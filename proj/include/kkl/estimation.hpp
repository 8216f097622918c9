#pragma once

#include <vector>

#include "kkl/mlp.hpp"
#include "kkl/observer.hpp"
#include "kkl/systems.hpp"

namespace kkl {

struct SimulateOptions {
  NoiseSpec noise;
  double T = 50.0;
  double dt = 0.1;
  Vec z0;      // observer initial state; empty means zero
  Vec z_ref0;  // reference filter initial state; empty means z0
};

// One rollout of the learned observer against the plant.
//   true_traj  plant state (with process noise, if any)
//   z_traj     observer filter driven by the noisy output
//   est_traj   est_traj[k] = eta(z_traj[k])
//   z_ref      filter copy driven by the noise-free plant's clean output
struct EstimationRun {
  Trajectory true_traj;
  Trajectory z_traj;
  Trajectory est_traj;
  Trajectory z_ref;
  std::vector<Vec> y_clean;
  std::vector<Vec> y_noisy;
  double w_bar = 0.0;  // max_k ||w_k||_inf of the realization
  double v_bar = 0.0;  // max_k ||v_k||_inf of the realization
};

EstimationRun simulate_observer(const SystemModel& sys, const ObserverMatrices& obs,
                                const MlpParams& eta, const Vec& x0, const SimulateOptions& opts);

// Recomputes est_traj from z_traj.
Trajectory reconstruct_estimates(const MlpParams& eta, const Trajectory& z_traj);

struct MetricsReport {
  double rmse = 0.0;
  double smape = 0.0;  // percent
  double t_cutoff = 0.0;
  std::size_t samples = 0;             // per metric, pooled over runs
  std::size_t degenerate_samples = 0;  // ||x|| + ||xhat|| == 0, skipped by SMAPE
  std::vector<double> run_rmse;
  std::vector<double> run_smape;
};

double rmse(const std::vector<EstimationRun>& runs, double t_cutoff = 0.0);
double smape(const std::vector<EstimationRun>& runs, double t_cutoff = 0.0);
MetricsReport compute_metrics(const std::vector<EstimationRun>& runs, double t_cutoff = 0.0);

struct EnvelopeCheck {
  bool pass = true;
  double min_margin = 0.0;
  std::size_t worst_index = 0;
  std::vector<double> margins;  // bound - ||z_ref - z_hat|| per checked sample
  std::vector<double> errors;   // ||z_ref - z_hat|| per checked sample
};

// Checks the ISS envelope of the filter error z_ref - z_hat from t_burn on:
//   ||e(t)|| <= cond(V) e^{lambda t} ||e0|| + cond(V)/|lambda| ||B|| (1 - e^{lambda t}) s
// with s = ell_h psi(wbar) + sqrt(n_y) vbar and t measured from t_burn.
EnvelopeCheck z_error_envelope_check(const EstimationRun& run, const ObserverMatrices& obs,
                                     double ell_h, double psi_wbar, double vbar,
                                     double t_burn = 0.0);

}  // namespace kkl
