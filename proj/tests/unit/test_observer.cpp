#include <doctest.h>

#include <cmath>

#include "kkl/error.hpp"
#include "kkl/observer.hpp"

using namespace kkl;

TEST_SUITE("observer") {
  TEST_CASE("dimensions and spectrum") {
    CHECK(build_observer(2, 1).n_z == 5);
    const ObserverMatrices o = build_observer(3, 1);
    REQUIRE(o.n_z == 7);
    const double expected[] = {-2, -1.75, -1.5, -1.25, -1, -0.75, -0.5};
    for (int i = 0; i < 7; ++i) CHECK(o.eigenvalues[i] == doctest::Approx(expected[i]).epsilon(1e-15));
    CHECK(o.lambda_min == -0.5);
    CHECK(o.cond_V == 1.0);
    CHECK(o.B == Mat::Ones(7, 1));
    CHECK(o.A.isDiagonal());
    CHECK(o.norm_B() == doctest::Approx(std::sqrt(7.0)));
    CHECK_THROWS_AS(build_observer(2, 1, -1.0, 0.5), DomainError);
    CHECK_THROWS_AS(build_observer(2, 1, -0.5, -2.0), DomainError);
  }

  TEST_CASE("controllable pair") {
    for (int n_x : {2, 3}) {
      const ObserverMatrices o = build_observer(n_x, 1);
      Eigen::FullPivLU<Mat> lu(controllability_matrix(o));
      CHECK(lu.rank() == o.n_z);
    }
  }

  TEST_CASE("truncation time and index") {
    CHECK(truncation_time(1e-4, 1.0, 1.0, -1.0) == doctest::Approx(9.21034).epsilon(1e-6));
    CHECK(truncation_time(1.0, 0.5, 1.0, -1.0) == 0.0);
    CHECK(truncation_index(9.21, 0.1) == 93);
    CHECK(truncation_index(0.0, 0.1) == 0);
    CHECK(truncation_index(0.1, 0.1) == 1);
    CHECK(truncation_index(0.3, 0.1) == 3);
  }

  TEST_CASE("envelope bounds the matrix exponential") {
    const ObserverMatrices o = build_observer(2, 1);
    CHECK(exp_envelope(o, 0.0) == 1.0);
    const ObserverMatrices d = observer_from_eigenvalues((Vec(2) << -2.0, -1.0).finished(), Mat::Ones(2, 1));
    CHECK(exp_envelope(d, 1.0) == doctest::Approx(std::exp(-1.0)));
    Eigen::JacobiSVD<Mat> svd(matrix_exponential(d, 1.0));
    CHECK(svd.singularValues()(0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-14));
    double prev = 2.0;
    for (double t = 0.0; t <= 20.0; t += 0.5) {
      Eigen::JacobiSVD<Mat> s(matrix_exponential(o, t));
      CHECK(s.singularValues()(0) <= exp_envelope(o, t) + 1e-12);
      CHECK(exp_envelope(o, t) < prev);
      prev = exp_envelope(o, t);
    }
  }

  TEST_CASE("input-to-state integral bound") {
    const ObserverMatrices o = build_observer(2, 1);
    const double h = 1e-3;
    for (double t : {0.5, 2.0, 10.0}) {
      const int n = static_cast<int>(std::lround(t / h));
      double integral = 0.0;
      for (int i = 0; i <= n; ++i) {
        const double w = (i == 0 || i == n) ? 0.5 : 1.0;
        integral += w * h * (matrix_exponential(o, i * h) * o.B).norm();
      }
      const double bound = o.cond_V / std::abs(o.lambda_min) * o.norm_B() * (1.0 - std::exp(o.lambda_min * t));
      CHECK(integral <= bound + 1e-6);
    }
  }
}
