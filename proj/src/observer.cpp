#include "kkl/observer.hpp"

#include <cmath>

#include <fmt/format.h>

#include "kkl/error.hpp"

namespace kkl {

double ObserverMatrices::norm_B() const {
  Eigen::JacobiSVD<Mat> svd(B);
  return svd.singularValues()(0);
}

ObserverMatrices observer_from_eigenvalues(const Vec& eigenvalues, const Mat& B) {
  const auto n = eigenvalues.size();
  if (n == 0 || B.rows() != n) {
    throw DimensionError(fmt::format("observer: {} eigenvalues but B has {} rows", n, B.rows()));
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(eigenvalues[i] < 0.0)) {
      throw DomainError(fmt::format("observer eigenvalue {} is not negative", eigenvalues[i]));
    }
    for (Eigen::Index j = 0; j < i; ++j) {
      if (eigenvalues[i] == eigenvalues[j]) throw DomainError("observer eigenvalues must be distinct");
    }
  }
  ObserverMatrices obs;
  obs.n_z = static_cast<int>(n);
  obs.eigenvalues = eigenvalues;
  obs.A = eigenvalues.asDiagonal();
  obs.B = B;
  obs.cond_V = 1.0;
  obs.lambda_min = eigenvalues.maxCoeff();
  return obs;
}

ObserverMatrices build_observer(int n_x, int n_y, double lambda_lo, double lambda_hi) {
  if (n_x < 1 || n_y < 1) throw DomainError("observer: n_x and n_y must be positive");
  if (!(lambda_hi < 0.0)) {
    throw DomainError(fmt::format("observer: lambda_hi must be negative, got {}", lambda_hi));
  }
  if (!(lambda_lo < lambda_hi)) {
    throw DomainError(
        fmt::format("observer: need lambda_lo < lambda_hi, got [{}, {}]", lambda_lo, lambda_hi));
  }
  const int n_z = n_y * (2 * n_x + 1);
  Vec eig(n_z);
  if (n_z == 1) {
    eig[0] = lambda_hi;
  } else {
    const double step = (lambda_hi - lambda_lo) / (n_z - 1);
    for (int i = 0; i < n_z; ++i) eig[i] = lambda_lo + step * i;
    eig[n_z - 1] = lambda_hi;
  }
  return observer_from_eigenvalues(eig, Mat::Ones(n_z, n_y));
}

double truncation_time(double eps, double z0_norm, double cond_V, double lambda_min) {
  if (!(eps > 0.0)) throw DomainError("truncation_time: eps must be positive");
  if (!(z0_norm > 0.0)) throw DomainError("truncation_time: z0 norm must be positive");
  if (!(lambda_min < 0.0)) throw DomainError("truncation_time: lambda_min must be negative");
  const double t = std::log(eps / (cond_V * z0_norm)) / lambda_min;
  return t > 0.0 ? t : 0.0;
}

std::size_t truncation_index(double t_star_max, double dt) {
  if (!(dt > 0.0)) throw DomainError("truncation_index: dt must be positive");
  if (!(t_star_max > 0.0)) return 0;
  auto k = static_cast<std::size_t>(std::ceil(t_star_max / dt));
  // ceil() of a rounded quotient can land one off in either direction.
  while (k > 0 && static_cast<double>(k - 1) * dt >= t_star_max) --k;
  while (static_cast<double>(k) * dt < t_star_max) ++k;
  return k;
}

double exp_envelope(const ObserverMatrices& obs, double t) {
  if (t < 0.0) throw DomainError("exp_envelope: t must be nonnegative");
  return obs.cond_V * std::exp(obs.lambda_min * t);
}

Mat matrix_exponential(const ObserverMatrices& obs, double t) {
  return Vec((obs.eigenvalues * t).array().exp()).asDiagonal();
}

Mat controllability_matrix(const ObserverMatrices& obs) {
  const auto n = obs.n_z;
  const auto m = obs.B.cols();
  Mat ctrb(n, n * m);
  Mat block = obs.B;
  for (int i = 0; i < n; ++i) {
    ctrb.middleCols(i * m, m) = block;
    block = obs.A * block;
  }
  return ctrb;
}

}  // namespace kkl
