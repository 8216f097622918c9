#include "kkl/bounds.hpp"

#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "kkl/error.hpp"

namespace kkl {

double complexity_term(double M, double d, double N, double delta) {
  if (!(M >= 0.0)) throw DomainError("complexity_term: M must be nonnegative");
  if (!(d >= 1.0)) throw DomainError("complexity_term: d must be >= 1");
  if (!(N >= d)) throw DomainError(fmt::format("complexity_term: need N >= d (N = {}, d = {})", N, d));
  if (!(delta > 0.0 && delta < 1.0)) throw DomainError("complexity_term: delta must be in (0, 1)");
  const double estimation = std::sqrt(2.0 * d * std::log(std::numbers::e * N / d) / N);
  const double confidence = std::sqrt(std::log(1.0 / delta) / (2.0 * N));
  return M * estimation + M * confidence;
}

double inverse_error_bound(double emp_r2, double comp_eta, double ell_eta, double emp_r1,
                           double comp_theta) {
  if (emp_r2 < 0.0 || comp_eta < 0.0 || ell_eta < 0.0 || emp_r1 < 0.0 || comp_theta < 0.0) {
    throw DomainError("inverse_error_bound: inputs must be nonnegative");
  }
  return 2.0 * (emp_r2 + 2.0 * comp_eta) + 2.0 * ell_eta * ell_eta * (emp_r1 + 2.0 * comp_theta);
}

double lemma2_chain(double r2, double ell_eta, double r_T) {
  if (r2 < 0.0 || ell_eta < 0.0 || r_T < 0.0) {
    throw DomainError("lemma2_chain: inputs must be nonnegative");
  }
  return 2.0 * r2 + 2.0 * ell_eta * ell_eta * r_T;
}

double steady_state_bound(double r_Tstar, double ell_eta, double cond_V, double lambda_min,
                          double norm_B, double ell_h, double psi_wbar, int n_y, double vbar) {
  if (!(lambda_min < 0.0)) throw DomainError("steady_state_bound: lambda_min must be negative");
  if (r_Tstar < 0.0 || ell_eta < 0.0 || cond_V < 0.0 || norm_B < 0.0 || ell_h < 0.0 ||
      psi_wbar < 0.0 || vbar < 0.0 || n_y < 1) {
    throw DomainError("steady_state_bound: inputs must be nonnegative");
  }
  const double gain = cond_V * norm_B / std::abs(lambda_min);
  const double drive = ell_h * psi_wbar + std::sqrt(static_cast<double>(n_y)) * vbar;
  return 2.0 * r_Tstar + 2.0 * ell_eta * ell_eta * gain * gain * drive * drive;
}

double estimate_ell_h(const OutputJacobian& jacobian, const Box& box, std::size_t n_samples,
                      std::uint64_t seed) {
  if (n_samples < 1) throw DomainError("estimate_ell_h: need at least one sample");
  const Mat pts = sample_box(n_samples, box, seed);
  double best = 0.0;
  for (Eigen::Index j = 0; j < pts.cols(); ++j) {
    const Mat J = jacobian(pts.col(j));
    Eigen::JacobiSVD<Mat> svd(J);
    best = std::max(best, svd.singularValues()(0));
  }
  return best;
}

double estimate_ell_h(const SystemModel& sys, const Box& box, std::size_t n_samples,
                      std::uint64_t seed) {
  return estimate_ell_h([&sys](const Vec& x) { return eval_output_jacobian(sys, x); }, box,
                        n_samples, seed);
}

double empirical_steady_state_error(const std::vector<EstimationRun>& runs, double t_cutoff) {
  if (runs.empty()) throw DomainError("steady-state error: no runs");
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& run : runs) {
    for (std::size_t k = 0; k < run.true_traj.size(); ++k) {
      if (run.true_traj.times[k] < t_cutoff - 1e-9 * run.true_traj.dt) continue;
      sum += (run.true_traj.states[k] - run.est_traj.states[k]).squaredNorm();
      ++count;
    }
  }
  if (count == 0) throw DomainError("steady-state error: empty window after cutoff");
  return sum / static_cast<double>(count);
}

}  // namespace kkl
