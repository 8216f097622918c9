#include <doctest.h>

#include <cmath>

#include "kkl/error.hpp"
#include "kkl/training.hpp"
#include "support.hpp"

using namespace kkl;
using kkl::test::random_matrix;
using kkl::test::random_net;

namespace {

// Labeled pairs z = M x + c + noise, collocation points elsewhere.
DatasetS1 linear_dataset(std::size_t n, std::uint64_t seed) {
  DatasetS1 s;
  s.x_data = random_matrix(2, static_cast<Eigen::Index>(n), seed);
  const Mat M = random_matrix(5, 2, seed + 1);
  const Vec c = random_matrix(5, 1, seed + 2);
  s.z_data = M * s.x_data + c.replicate(1, static_cast<Eigen::Index>(n)) +
             random_matrix(5, static_cast<Eigen::Index>(n), seed + 3, 0.05);
  s.x_pde = random_matrix(2, 10, seed + 4);
  return s;
}

// Mean squared residual of the affine least-squares fit.
double least_squares_optimum(const Mat& X, const Mat& Z) {
  Mat Xa(X.rows() + 1, X.cols());
  Xa << X, Mat::Ones(1, X.cols());
  const Mat W = (Xa * Xa.transpose()).ldlt().solve(Xa * Z.transpose()).transpose();
  return (Z - W * Xa).colwise().squaredNorm().sum() / static_cast<double>(X.cols());
}

}  // namespace

TEST_SUITE("training") {
  TEST_CASE("pde residual oracles") {
    const SystemModel duff = make_system("duffing");
    const ObserverMatrices obs = build_observer(2, 1);
    const Vec x = (Vec(2) << 0.3, -0.8).finished();
    CHECK((pde_residual(zero_params({2, 7, 5}), obs, duff, x) + obs.B * x[0]).norm() == 0.0);

    const SystemModel lor = make_system("lorenz");
    const ObserverMatrices obs3 = build_observer(3, 1);
    CHECK(pde_residual(zero_params({3, 4, 7}), obs3, lor, Vec::Zero(3)).norm() == 0.0);

    MlpParams lin = zero_params({2, 5});
    lin.weights[0] = random_matrix(5, 2, 1);
    lin.biases[0] = random_matrix(5, 1, 2);
    const Vec one = Vec::Ones(2);
    const Vec f = (Vec(2) << 1.0, -1.0).finished();  // duffing at (1, 1)
    const Vec expect = lin.weights[0] * f - obs.A * (lin.weights[0] * one + lin.biases[0]) - obs.B * 1.0;
    CHECK((pde_residual(lin, obs, duff, one) - expect).lpNorm<Eigen::Infinity>() < 1e-12);
    CHECK_THROWS_AS(pde_residual(zero_params({3, 5}), obs, duff, x), DimensionError);
  }

  TEST_CASE("empirical risks by hand") {
    const SystemModel duff = make_system("duffing");
    const ObserverMatrices obs = build_observer(2, 1);
    DatasetS1 s;
    s.x_data = (Mat(2, 1) << 0.5, 0.1).finished();
    s.z_data = (Mat(5, 1) << 1, 2, 0, -1, 0.5).finished();
    s.x_pde = (Mat(2, 1) << -0.4, 0.9).finished();
    const double nu = 0.7;
    const RiskS1 r = empirical_risk_s1(zero_params({2, 6, 5}), s, obs, duff, nu);
    const double bh = (obs.B * (-0.4)).squaredNorm();
    CHECK(r.data == doctest::Approx(6.25));
    CHECK(r.pde == doctest::Approx(bh));
    CHECK(r.total == r.data + nu * r.pde);

    // A network that reproduces every label has zero data risk.
    MlpParams fit = zero_params({2, 5});
    fit.biases[0] = s.z_data.col(0);
    CHECK(empirical_risk_s1(fit, s, obs, duff, 0.0).total == 0.0);

    DatasetS2 s2{Mat::Zero(3, 2), (Mat(2, 2) << 1, 0, 0, 2).finished()};
    CHECK(empirical_risk_s2(zero_params({3, 4, 2}), s2) == doctest::Approx(2.5));
    DatasetS2 zero{Mat::Ones(3, 4), Mat::Zero(2, 4)};
    CHECK(empirical_risk_s2(zero_params({3, 4, 2}), zero) == 0.0);
    CHECK_THROWS_AS(empirical_risk_s2(zero_params({3, 2}), DatasetS2{Mat(3, 0), Mat(2, 0)}), DomainError);
  }

  TEST_CASE("risk gradient matches finite differences on a toy dataset") {
    const SystemModel duff = make_system("duffing");
    const ObserverMatrices obs = build_observer(2, 1);
    DatasetS1 s;
    s.x_data = random_matrix(2, 3, 1);
    s.z_data = random_matrix(5, 3, 2);
    s.x_pde = random_matrix(2, 3, 3);
    MlpParams p = random_net({2, 8, 8, 5}, 4);
    const LossAndGradient lg = risk_s1_gradient(p, s, obs, duff, 1.0);
    CHECK(lg.value == doctest::Approx(empirical_risk_s1(p, s, obs, duff, 1.0).total).epsilon(1e-12));
    const Vec theta = p.flatten();
    Vec fd(theta.size());
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
      Vec t = theta;
      t[i] += 1e-6;
      p.assign(t);
      const double up = empirical_risk_s1(p, s, obs, duff, 1.0).total;
      t[i] -= 2e-6;
      p.assign(t);
      fd[i] = (up - empirical_risk_s1(p, s, obs, duff, 1.0).total) / 2e-6;
    }
    CHECK((lg.gradient.values - fd).norm() / fd.norm() < 1e-6);
    CHECK(kkl::test::max_rel_error(lg.gradient.values, fd, 1e-3) < 1e-4);
  }

  TEST_CASE("adam step") {
    MlpParams shape = zero_params({2, 2});
    AdamOptimizer adam(shape, 0.01);
    Vec p = Vec::Zero(6);
    const Vec g = (Vec(6) << 1.0, -2.0, 0.5, 3.0, -1.0, 1e-3).finished();
    adam.step(p, g);
    // First bias-corrected step is lr * g / (|g| + eps).
    for (int i = 0; i < 6; ++i) CHECK(p[i] == doctest::Approx(-0.01 * g[i] / (std::abs(g[i]) + 1e-8)));

    // Decoupled decay shrinks weights only.
    AdamOptimizer decayed(shape, 0.1, 0.5);
    Vec q = Vec::Ones(6);
    decayed.step(q, Vec::Zero(6));
    for (int i = 0; i < 4; ++i) CHECK(q[i] == doctest::Approx(0.95));
    for (int i = 4; i < 6; ++i) CHECK(q[i] == 1.0);
  }

  TEST_CASE("linear least squares is recovered") {
    const SystemModel duff = make_system("duffing");
    const ObserverMatrices obs = build_observer(2, 1);
    const DatasetS1 s = linear_dataset(200, 10);
    TrainConfig cfg;
    cfg.hidden_layers = 0;
    cfg.nu = 0.0;
    cfg.learning_rate = 0.01;
    cfg.epochs = 3000;
    const auto [theta, rep] = train_forward(s, obs, duff, cfg);
    const double opt = least_squares_optimum(s.x_data, s.z_data);
    CHECK(rep.total_loss.size() == 3000);
    CHECK(empirical_risk_s1(theta, s, obs, duff, 0.0).data - opt < 1e-6);
  }

  TEST_CASE("linear inverse is recovered") {
    const SystemModel duff = make_system("duffing");
    MlpParams theta = zero_params({2, 5});
    theta.weights[0] = random_matrix(5, 2, 3);
    theta.biases[0] = random_matrix(5, 1, 4);
    const std::uint64_t before = theta.checksum();
    S2Config sc;
    sc.n2 = 500;
    sc.x_box = Box::symmetric(2, 1.0);
    const DatasetS2 s2 = generate_s2(theta, duff, sc);
    TrainConfig cfg;
    cfg.hidden_layers = 0;
    cfg.learning_rate = 0.01;
    cfg.epochs = 2000;
    const auto [eta, rep] = train_inverse(s2, cfg);
    CHECK(empirical_risk_s2(eta, s2) < 1e-6);
    CHECK(theta.checksum() == before);
  }

  TEST_CASE("training is deterministic, logs consistent losses and decays weights") {
    const SystemModel duff = make_system("duffing");
    const ObserverMatrices obs = build_observer(2, 1);
    S1Config sc;
    sc.p = 4;
    sc.q = 4;
    sc.T = 10.0;
    sc.x_box = Box::symmetric(2, 1.0);
    const DatasetS1 s = generate_s1(duff, obs, sc);
    TrainConfig cfg;
    cfg.hidden_layers = 2;
    cfg.layer_size = 16;
    cfg.epochs = 3;
    cfg.seed = 5;
    const auto a = train_forward(s, obs, duff, cfg);
    const auto b = train_forward(s, obs, duff, cfg);
    CHECK(a.second.checksum == b.second.checksum);
    CHECK(a.first.checksum() == a.second.checksum);
    for (std::size_t e = 0; e < a.second.total_loss.size(); ++e) {
      CHECK(a.second.total_loss[e] == a.second.data_loss[e] + cfg.nu * a.second.pde_loss[e]);
    }
    CHECK(a.second.total_loss.back() < a.second.initial_total_loss);

    const DatasetS2 s2{forward_batch(a.first, s.x_data), s.x_data};
    TrainConfig ic = cfg;
    ic.epochs = 5;
    const auto plain = train_inverse(s2, ic);
    ic.weight_decay = 1.0;
    const auto decayed = train_inverse(s2, ic);
    CHECK(lipschitz_upper_bound(decayed.first) <= lipschitz_upper_bound(plain.first));

    cfg.epochs = 0;
    CHECK_THROWS_AS(train_forward(s, obs, duff, cfg), ConfigError);
  }
}
