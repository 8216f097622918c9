#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "kkl/datagen.hpp"
#include "kkl/estimation.hpp"
#include "kkl/systems.hpp"

namespace kkl {

// Generalization penalty for a loss bounded by M over a class of
// pseudo-dimension d with N samples, holding with probability 1 - delta:
//   M sqrt(2 d ln(e N / d) / N) + M sqrt(ln(1 / delta) / (2 N))
double complexity_term(double M, double d, double N, double delta);

// 2 (emp_r2 + 2 comp_eta) + 2 ell_eta^2 (emp_r1 + 2 comp_theta)
double inverse_error_bound(double emp_r2, double comp_eta, double ell_eta, double emp_r1,
                           double comp_theta);

// 2 r2 + 2 ell_eta^2 r_T
double lemma2_chain(double r2, double ell_eta, double r_T);

// Expected squared steady-state error bound under bounded disturbances:
//   2 R + 2 ell_eta^2 (cond_V ||B|| / |lambda_min|)^2 (ell_h psi(wbar) + sqrt(n_y) vbar)^2
double steady_state_bound(double r_Tstar, double ell_eta, double cond_V, double lambda_min,
                          double norm_B, double ell_h, double psi_wbar, int n_y, double vbar);

using OutputJacobian = std::function<Mat(const Vec&)>;

// Largest sigma_max of the output Jacobian over sampled points of the box.
double estimate_ell_h(const OutputJacobian& jacobian, const Box& box, std::size_t n_samples,
                      std::uint64_t seed);
double estimate_ell_h(const SystemModel& sys, const Box& box, std::size_t n_samples,
                      std::uint64_t seed);

// Mean of ||x - xhat||^2 over all samples with t >= t_cutoff, pooled over runs.
double empirical_steady_state_error(const std::vector<EstimationRun>& runs, double t_cutoff);

}  // namespace kkl
