#include <doctest.h>

#include <set>

#include "kkl/datagen.hpp"
#include "kkl/error.hpp"
#include "support.hpp"

using namespace kkl;

namespace {

S1Config duffing_config() {
  S1Config c;
  c.x_box = Box::symmetric(2, 1.0);
  c.seed = 3;
  return c;
}

}  // namespace

TEST_SUITE("datagen") {
  TEST_CASE("box sampling") {
    const Box b = Box::symmetric(3, 2.0);
    CHECK(sample_box(0, b, 1).cols() == 0);
    const Mat pts = sample_box(1000, b, 1);
    CHECK((pts.array().abs() <= 2.0).all());
    CHECK(sample_box(1000, b, 1) == pts);
    CHECK(sample_box(10, b, 2) != sample_box(10, b, 1));
    Box flat = b;
    flat.hi[1] = flat.lo[1];
    CHECK_THROWS_AS(sample_box(5, flat, 1), DomainError);
    CHECK(derive_seed(1, 2) != derive_seed(2, 1));
  }

  TEST_CASE("reference configuration counts and truncation") {
    const SystemModel sys = make_system("duffing");
    const ObserverMatrices obs = build_observer(2, 1);
    const DatasetS1 s = generate_s1(sys, obs, duffing_config());
    CHECK(s.tau == 500);
    CHECK(s.k_star == 50);
    CHECK(s.n_data() == 45100);
    CHECK(s.n_pde() == 50000);
    CHECK(s.x0.cols() == 100);
    // Every retained pair is past the truncation time of its z0.
    for (std::size_t col = 0; col < s.n_data(); col += 37) {
      const std::size_t i = s.trajectory_of(col);
      const double t = static_cast<double>(s.sample_index_of(col)) * s.dt;
      CHECK((matrix_exponential(obs, t) * s.z0.col(static_cast<Eigen::Index>(i))).norm() <= 1e-4);
      CHECK(t + 1e-12 >= s.t_star_max);
    }
  }

  TEST_CASE("pairs are time aligned") {
    const SystemModel sys = make_system("vanderpol");
    const ObserverMatrices obs = build_observer(2, 1);
    S1Config c = duffing_config();
    c.p = 3;
    c.q = 2;
    c.T = 20.0;
    const DatasetS1 s = generate_s1(sys, obs, c);
    const std::size_t kept = s.tau - s.k_star + 1;
    REQUIRE(s.n_data() == 3 * kept);
    CHECK(s.n_pde() == 2 * s.tau);
    for (std::size_t i = 0; i < 3; ++i) {
      const Trajectory xs = integrate(dynamics_field(sys), s.x0.col(static_cast<Eigen::Index>(i)), c.T, c.dt);
      std::vector<Vec> y;
      for (const auto& x : xs.states) y.push_back(eval_output(sys, x));
      const Trajectory zs = integrate_driven(obs.A, obs.B, s.z0.col(static_cast<Eigen::Index>(i)), y, c.dt);
      for (std::size_t k = s.k_star; k <= s.tau; k += 13) {
        const auto col = static_cast<Eigen::Index>(i * kept + k - s.k_star);
        CHECK(s.x_data.col(col) == xs.states[k]);
        CHECK(s.z_data.col(col) == zs.states[k]);
      }
    }
  }

  TEST_CASE("explicit z box and short horizons") {
    const SystemModel sys = make_system("duffing");
    const ObserverMatrices obs = build_observer(2, 1);
    S1Config c = duffing_config();
    c.p = 5;
    c.q = 1;
    c.z_box = Box::symmetric(5, 1.0);
    const DatasetS1 s = generate_s1(sys, obs, c);
    CHECK(s.k_star > 50);  // unit-cube z0 needs more than 5 s to forget
    CHECK(s.k_star == truncation_index(s.t_star_max, 0.1));
    c.T = 10.0;
    CHECK_THROWS_AS(generate_s1(sys, obs, c), ConfigError);
  }

  TEST_CASE("reproducibility") {
    const SystemModel sys = make_system("duffing");
    const ObserverMatrices obs = build_observer(2, 1);
    S1Config c = duffing_config();
    c.p = 10;
    c.q = 10;
    const DatasetS1 a = generate_s1(sys, obs, c), b = generate_s1(sys, obs, c);
    CHECK(a.x_data == b.x_data);
    CHECK(a.z_data == b.z_data);
    CHECK(a.x_pde == b.x_pde);
  }

  TEST_CASE("second-stage data") {
    const SystemModel sys = make_system("duffing");
    const MlpParams theta = kkl::test::random_net({2, 10, 5}, 1);
    S2Config c;
    c.x_box = Box::symmetric(2, 1.0);
    CHECK(generate_s2(theta, sys, c).size() == 0);
    c.n2 = 10000;
    const DatasetS2 s = generate_s2(theta, sys, c);
    for (Eigen::Index j = 0; j < s.x.cols(); j += 97) CHECK(s.z.col(j) == forward(theta, s.x.col(j)));
    std::set<int> cells;
    for (Eigen::Index j = 0; j < s.x.cols(); ++j) {
      const int a = std::min(9, static_cast<int>((s.x(0, j) + 1.0) * 5.0));
      const int b = std::min(9, static_cast<int>((s.x(1, j) + 1.0) * 5.0));
      cells.insert(10 * a + b);
    }
    CHECK(cells.size() >= 95);

    c.mode = S2Mode::Trajectories;
    c.n2 = 1200;
    const DatasetS2 t = generate_s2(theta, sys, c);
    CHECK(t.size() == 1200);
    CHECK(t.z.col(700) == forward(theta, t.x.col(700)));
    CHECK(s2_mode_from_string(to_string(S2Mode::Trajectories)) == S2Mode::Trajectories);
    CHECK_THROWS_AS(s2_mode_from_string("grid"), ConfigError);

    const Mat m = (Mat(2, 3) << 0, 1, -2, 5, 3, 4).finished();
    const Box bb = bounding_box({&m});
    CHECK(bb.lo == (Vec(2) << -2, 3).finished());
    CHECK(bb.hi == (Vec(2) << 1, 5).finished());
  }
}
