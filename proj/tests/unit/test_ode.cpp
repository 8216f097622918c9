#include <doctest.h>

#include <cmath>
#include <sstream>

#include "kkl/error.hpp"
#include "kkl/ode.hpp"
#include "kkl/systems.hpp"

using namespace kkl;

namespace {

VectorField decay() {
  return [](const Vec& x) -> Vec { return -x; };
}

double end_error(double dt) {
  const Trajectory tr = integrate(decay(), Vec::Constant(1, 1.0), 1.0, dt);
  return std::abs(tr.states.back()[0] - std::exp(-1.0));
}

}  // namespace

TEST_SUITE("ode") {
  TEST_CASE("zero field leaves the state unchanged") {
    const Vec x = (Vec(2) << 1.0, 2.0).finished();
    const Vec y = rk4_step([](const Vec& v) -> Vec { return Vec::Zero(v.size()); }, x, 0.1);
    CHECK(y == x);
  }

  TEST_CASE("one step of x' = -x matches exp(-dt)") {
    const Vec y = rk4_step(decay(), Vec::Constant(1, 1.0), 0.1);
    CHECK(std::abs(y[0] - std::exp(-0.1)) < 1e-7);
  }

  TEST_CASE("sample grid and constant solution") {
    const Trajectory tr =
        integrate([](const Vec& v) -> Vec { return Vec::Zero(v.size()); }, Vec::Constant(1, 5.0), 1.0, 0.1);
    REQUIRE(tr.size() == 11);
    for (std::size_t k = 0; k < tr.size(); ++k) {
      CHECK(tr.states[k][0] == 5.0);
      CHECK(tr.times[k] == doctest::Approx(0.1 * static_cast<double>(k)));
    }
    CHECK(sample_count(50.0, 0.1) == 501);
    CHECK_THROWS_AS(sample_count(0.05, 0.1), DomainError);
  }

  TEST_CASE("lorenz origin is an equilibrium") {
    const SystemModel sys = make_system("lorenz");
    const Trajectory tr = integrate(dynamics_field(sys), Vec::Zero(3), 5.0, 0.1, sys.substeps);
    for (const auto& x : tr.states) CHECK(x.norm() == 0.0);
  }

  TEST_CASE("decay to t = 1 with dt = 0.01") {
    const Trajectory tr = integrate(decay(), Vec::Constant(1, 1.0), 1.0, 0.01);
    CHECK(std::abs(tr.states.back()[0] - 0.367879441171) < 1e-6);
  }

  TEST_CASE("fourth order convergence") {
    const double e1 = end_error(0.1), e2 = end_error(0.05), e3 = end_error(0.025);
    CHECK(e1 / e2 >= 12.0);
    CHECK(e1 / e2 <= 20.0);
    CHECK(e2 / e3 >= 12.0);
    CHECK(e2 / e3 <= 20.0);
  }

  TEST_CASE("substeps refine the same sample grid") {
    const Trajectory a = integrate(decay(), Vec::Constant(1, 1.0), 1.0, 0.1, 4);
    const Trajectory b = integrate(decay(), Vec::Constant(1, 1.0), 1.0, 0.025);
    REQUIRE(a.size() == 11);
    for (std::size_t k = 0; k < a.size(); ++k) CHECK(a.states[k][0] == doctest::Approx(b.states[4 * k][0]).epsilon(1e-14));
  }

  TEST_CASE("driven filter: free decay, zero input, steady state") {
    const Mat A = Mat::Constant(1, 1, -1.0);
    const Mat B = Mat::Constant(1, 1, 1.0);
    std::vector<Vec> zero(101, Vec::Zero(1));
    const Trajectory free = integrate_driven(A, B, Vec::Constant(1, 1.0), zero, 0.01);
    CHECK(std::abs(free.states.back()[0] - std::exp(-1.0)) < 1e-6);

    const Trajectory still = integrate_driven(A, B, Vec::Zero(1), zero, 0.01);
    for (const auto& z : still.states) CHECK(z[0] == 0.0);

    std::vector<Vec> ones(151, Vec::Constant(1, 1.0));
    const Trajectory ss = integrate_driven(A, B, Vec::Zero(1), ones, 0.1);
    CHECK(ss.times.back() == doctest::Approx(15.0));
    CHECK(std::abs(ss.states.back()[0] - 1.0) < 1e-4);
  }

  TEST_CASE("zero-order hold matches the augmented affine field") {
    const Mat A = (Mat(2, 2) << -1.0, 0.0, 0.0, -2.0).finished();
    const Mat B = (Mat(2, 1) << 1.0, 1.0).finished();
    const Vec z0 = (Vec(2) << 0.3, -0.7).finished();
    const double u = 0.8;
    std::vector<Vec> input(41, Vec::Constant(1, u));
    const Trajectory driven = integrate_driven(A, B, z0, input, 0.1);
    const Trajectory affine =
        integrate([&](const Vec& z) -> Vec { return A * z + B * u; }, z0, 4.0, 0.1);
    REQUIRE(driven.size() == affine.size());
    for (std::size_t k = 0; k < driven.size(); ++k) CHECK((driven.states[k] - affine.states[k]).norm() < 1e-12);
  }

  TEST_CASE("divergence is reported with the step") {
    const VectorField blowup = [](const Vec& x) -> Vec { return x.array().square().matrix() * 1e3; };
    try {
      integrate(blowup, Vec::Constant(1, 10.0), 10.0, 0.1);
      FAIL("expected divergence");
    } catch (const DivergenceError& e) {
      CHECK(std::string(e.what()).find("step") != std::string::npos);
    }
  }

  TEST_CASE("determinism and csv layout") {
    const SystemModel sys = make_system("vanderpol");
    const Vec x0 = (Vec(2) << 0.4, -0.2).finished();
    const Trajectory a = integrate(dynamics_field(sys), x0, 10.0, 0.1);
    const Trajectory b = integrate(dynamics_field(sys), x0, 10.0, 0.1);
    for (std::size_t k = 0; k < a.size(); ++k) CHECK(a.states[k] == b.states[k]);
    std::ostringstream os;
    write_trajectory_csv(os, a);
    std::istringstream is(os.str());
    std::string header, row;
    std::getline(is, header);
    std::getline(is, row);
    CHECK(header == "t,x1,x2");
    CHECK(row == "0,0.40000000000000002,-0.20000000000000001");
  }
}
