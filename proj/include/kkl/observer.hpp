#pragma once

#include <cstddef>

#include "kkl/ode.hpp"

namespace kkl {

// Lifted linear filter z' = A z + B y with diagonal Hurwitz A.
struct ObserverMatrices {
  int n_z = 0;
  Vec eigenvalues;  // distinct, negative, ascending
  Mat A;
  Mat B;
  double cond_V = 1.0;
  double lambda_min = 0.0;  // eigenvalue closest to the imaginary axis

  // Spectral norm of B.
  double norm_B() const;
};

// n_z = n_y (2 n_x + 1) eigenvalues equally spaced over [lambda_lo, lambda_hi].
ObserverMatrices build_observer(int n_x, int n_y, double lambda_lo = -2.0,
                                double lambda_hi = -0.5);

// Rebuild from stored eigenvalues and B, e.g. when loading a model file.
ObserverMatrices observer_from_eigenvalues(const Vec& eigenvalues, const Mat& B);

// Earliest time after which ||exp(A t) z0|| <= eps is guaranteed; clamped at 0.
double truncation_time(double eps, double z0_norm, double cond_V, double lambda_min);

// Smallest k with k * dt >= t_star_max.
std::size_t truncation_index(double t_star_max, double dt);

// cond(V) exp(lambda_min t), an upper bound on ||exp(A t)||.
double exp_envelope(const ObserverMatrices& obs, double t);

// exp(A t) for the diagonal A.
Mat matrix_exponential(const ObserverMatrices& obs, double t);

// [B, AB, ..., A^{n_z-1} B]
Mat controllability_matrix(const ObserverMatrices& obs);

}  // namespace kkl
