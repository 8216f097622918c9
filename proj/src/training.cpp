#include "kkl/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>
#include <span>

#include <fmt/format.h>

#include "kkl/error.hpp"

namespace kkl {

namespace {

using Indices = std::vector<Eigen::Index>;

Mat gather(const Mat& m, std::span<const Eigen::Index> idx) {
  Mat out(m.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t j = 0; j < idx.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = m.col(idx[j]);
  return out;
}

// Ordered sum so results do not depend on vectorization of the reduction.
double ordered_sum(const Vec& v) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) s += v[i];
  return s;
}

struct PdeTerms {
  Mat f;   // f(x) per collocation point
  Mat bh;  // B h(x) per collocation point
};

PdeTerms pde_terms(const Mat& X, const ObserverMatrices& obs, const SystemModel& sys) {
  PdeTerms t{Mat(X.rows(), X.cols()), Mat(obs.n_z, X.cols())};
  for (Eigen::Index j = 0; j < X.cols(); ++j) {
    const Vec x = X.col(j);
    t.f.col(j) = eval_dynamics(sys, x);
    t.bh.col(j) = obs.B * eval_output(sys, x);
  }
  return t;
}

Vec data_errors(const MlpParams& net, const Mat& X, const Mat& Y) {
  return (Y - forward_batch(net, X)).colwise().squaredNorm().transpose();
}

Vec pde_errors(const MlpParams& theta, const ObserverMatrices& obs, const Mat& X,
               const PdeTerms& terms) {
  const TangentOutputs out = forward_tangent_batch(theta, X, terms.f);
  const Mat r = out.tangents - obs.A * out.values - terms.bh;
  return r.colwise().squaredNorm().transpose();
}

// Mean squared error block loss: (scale) * sum ||target - y||^2.
BlockLoss regression_loss(const Mat& target, double scale) {
  return [&target, scale](Eigen::Index c0, const Mat& Y, const Mat*, Mat& dY, Mat*) {
    const Mat diff = target.middleCols(c0, Y.cols()) - Y;
    dY = -2.0 * scale * diff;
    return scale * diff.squaredNorm();
  };
}

// (scale) * sum ||Ydot - A Y - B h||^2.
BlockLoss residual_loss(const Mat& A, const Mat& bh, double scale) {
  return [&A, &bh, scale](Eigen::Index c0, const Mat& Y, const Mat* Yd, Mat& dY, Mat* dYd) {
    const Mat r = *Yd - A * Y - bh.middleCols(c0, Y.cols());
    *dYd = 2.0 * scale * r;
    dY = -A.transpose() * *dYd;
    return scale * r.squaredNorm();
  };
}

struct Objective {
  std::size_t n_primary = 0;
  std::size_t n_secondary = 0;  // 0 disables the second term
  std::function<Vec(const MlpParams&, std::span<const Eigen::Index>)> primary_grad;
  std::function<Vec(const MlpParams&, std::span<const Eigen::Index>)> secondary_grad;
  std::function<RiskS1(const MlpParams&)> evaluate;
};

std::pair<MlpParams, TrainReport> run_training(MlpParams params, const TrainConfig& cfg,
                                               const Objective& obj) {
  const auto start = std::chrono::steady_clock::now();
  TrainReport report;
  AdamOptimizer adam(params, cfg.learning_rate, cfg.weight_decay);
  Vec flat = params.flatten();

  const RiskS1 initial = obj.evaluate(params);
  report.initial_data_loss = initial.data;
  report.initial_pde_loss = initial.pde;
  report.initial_total_loss = initial.total;
  MlpParams best = params;
  double best_total = initial.total;

  const auto batch = static_cast<std::size_t>(cfg.batch_size);
  Indices perm_p(obj.n_primary), perm_s(obj.n_secondary);
  std::iota(perm_p.begin(), perm_p.end(), 0);
  std::iota(perm_s.begin(), perm_s.end(), 0);
  const std::size_t nb_p = (obj.n_primary + batch - 1) / batch;
  const std::size_t nb_s = (obj.n_secondary + batch - 1) / batch;
  const std::size_t steps = std::max(nb_p, nb_s);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::mt19937_64 rng(derive_seed(cfg.seed, 1000 + static_cast<std::uint64_t>(epoch)));
    std::shuffle(perm_p.begin(), perm_p.end(), rng);
    std::shuffle(perm_s.begin(), perm_s.end(), rng);

    for (std::size_t s = 0; s < steps; ++s) {
      const std::size_t bp = (s % nb_p) * batch;
      Vec grad = obj.primary_grad(
          params, std::span<const Eigen::Index>(perm_p).subspan(bp, std::min(batch, obj.n_primary - bp)));
      if (nb_s > 0) {
        const std::size_t bs = (s % nb_s) * batch;
        grad += obj.secondary_grad(params, std::span<const Eigen::Index>(perm_s).subspan(
                                               bs, std::min(batch, obj.n_secondary - bs)));
      }
      if (!grad.allFinite()) {
        throw DivergenceError(fmt::format("non-finite gradient in epoch {}", epoch));
      }
      adam.step(flat, grad);
      params.assign(flat);
    }

    const RiskS1 risk = obj.evaluate(params);
    if (!std::isfinite(risk.total)) {
      throw DivergenceError(fmt::format("training loss diverged in epoch {}", epoch));
    }
    report.data_loss.push_back(risk.data);
    report.pde_loss.push_back(risk.pde);
    report.total_loss.push_back(risk.total);
    if (risk.total < best_total) {
      best_total = risk.total;
      best = params;
      report.best_epoch = epoch;
    }
  }

  report.checksum = best.checksum();
  report.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return {std::move(best), std::move(report)};
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError(fmt::format("epochs must be >= 1, got {}", epochs));
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (!(nu >= 0.0)) throw ConfigError("nu must be nonnegative");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (hidden_layers < 0 || (hidden_layers > 0 && layer_size < 1)) {
    throw ConfigError("invalid hidden layer configuration");
  }
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be nonnegative");
}

AdamOptimizer::AdamOptimizer(const MlpParams& shape, double learning_rate, double weight_decay)
    : lr_(learning_rate), decay_(weight_decay) {
  const auto n = static_cast<Eigen::Index>(shape.parameter_count());
  m_ = Vec::Zero(n);
  v_ = Vec::Zero(n);
  decay_mask_ = Vec::Zero(n);
  Eigen::Index off = 0;
  for (std::size_t l = 0; l < shape.num_layers(); ++l) {
    decay_mask_.segment(off, shape.weights[l].size()).setOnes();
    off += shape.weights[l].size() + shape.biases[l].size();
  }
}

void AdamOptimizer::step(Vec& params, const Vec& grad) {
  ++t_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
  v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  if (decay_ > 0.0) params.array() -= lr_ * decay_ * decay_mask_.array() * params.array();
  params.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
}

Vec pde_residual(const MlpParams& theta, const ObserverMatrices& obs, const SystemModel& sys,
                 const Vec& x) {
  if (theta.n_in() != sys.n_x || theta.n_out() != obs.n_z) {
    throw DimensionError(fmt::format("forward map is {} -> {}, expected {} -> {}", theta.n_in(),
                                     theta.n_out(), sys.n_x, obs.n_z));
  }
  return input_jacobian(theta, x) * eval_dynamics(sys, x) - obs.A * forward(theta, x) -
         obs.B * eval_output(sys, x);
}

RiskS1 empirical_risk_s1(const MlpParams& theta, const DatasetS1& s1, const ObserverMatrices& obs,
                         const SystemModel& sys, double nu) {
  if (s1.n_data() == 0) throw DomainError("S1 risk: empty labeled partition");
  if (s1.n_pde() == 0) throw DomainError("S1 risk: empty collocation partition");
  if (theta.n_in() != sys.n_x || theta.n_out() != obs.n_z) {
    throw DimensionError("S1 risk: network shape does not match system and observer");
  }
  RiskS1 r;
  r.data = ordered_sum(data_errors(theta, s1.x_data, s1.z_data)) / static_cast<double>(s1.n_data());
  r.pde = ordered_sum(pde_errors(theta, obs, s1.x_pde, pde_terms(s1.x_pde, obs, sys))) /
          static_cast<double>(s1.n_pde());
  r.total = r.data + nu * r.pde;
  return r;
}

double empirical_risk_s2(const MlpParams& eta, const DatasetS2& s2) {
  if (s2.size() == 0) throw DomainError("S2 risk: empty dataset");
  if (eta.n_in() != s2.z.rows() || eta.n_out() != s2.x.rows()) {
    throw DimensionError("S2 risk: network shape does not match dataset");
  }
  return ordered_sum(data_errors(eta, s2.z, s2.x)) / static_cast<double>(s2.size());
}

LossAndGradient risk_s1_gradient(const MlpParams& theta, const DatasetS1& s1,
                                 const ObserverMatrices& obs, const SystemModel& sys, double nu) {
  if (s1.n_data() == 0 || s1.n_pde() == 0) throw DomainError("S1 gradient: empty partition");
  const PdeTerms terms = pde_terms(s1.x_pde, obs, sys);
  LossAndGradient out = loss_gradient(
      theta, s1.x_data, nullptr, regression_loss(s1.z_data, 1.0 / static_cast<double>(s1.n_data())));
  if (nu > 0.0) {
    const LossAndGradient pde = loss_gradient(
        theta, s1.x_pde, &terms.f, residual_loss(obs.A, terms.bh, nu / static_cast<double>(s1.n_pde())));
    out.value += pde.value;
    out.gradient.values += pde.gradient.values;
  }
  return out;
}

double max_sample_loss_s1(const MlpParams& theta, const DatasetS1& s1,
                          const ObserverMatrices& obs, const SystemModel& sys, double nu) {
  const double data = data_errors(theta, s1.x_data, s1.z_data).maxCoeff();
  const double pde = pde_errors(theta, obs, s1.x_pde, pde_terms(s1.x_pde, obs, sys)).maxCoeff();
  return data + nu * pde;
}

double max_sample_loss_s2(const MlpParams& eta, const DatasetS2& s2) {
  return data_errors(eta, s2.z, s2.x).maxCoeff();
}

std::pair<MlpParams, TrainReport> train_forward(const DatasetS1& s1, const ObserverMatrices& obs,
                                                const SystemModel& sys, const TrainConfig& cfg) {
  cfg.validate();
  if (s1.n_data() == 0 || s1.n_pde() == 0) throw DomainError("train_forward: empty S1 partition");
  const MlpParams init =
      init_params(mlp_layout(sys.n_x, cfg.hidden_layers, cfg.layer_size, obs.n_z),
                  derive_seed(cfg.seed, 1));
  const PdeTerms terms = pde_terms(s1.x_pde, obs, sys);

  Objective obj;
  obj.n_primary = s1.n_data();
  obj.n_secondary = cfg.nu > 0.0 ? s1.n_pde() : 0;
  obj.primary_grad = [&](const MlpParams& p, std::span<const Eigen::Index> idx) {
    const Mat X = gather(s1.x_data, idx);
    const Mat Z = gather(s1.z_data, idx);
    return loss_gradient(p, X, nullptr, regression_loss(Z, 1.0 / static_cast<double>(idx.size())))
        .gradient.values;
  };
  obj.secondary_grad = [&](const MlpParams& p, std::span<const Eigen::Index> idx) {
    const Mat X = gather(s1.x_pde, idx);
    const Mat F = gather(terms.f, idx);
    const Mat BH = gather(terms.bh, idx);
    return loss_gradient(p, X, &F,
                         residual_loss(obs.A, BH, cfg.nu / static_cast<double>(idx.size())))
        .gradient.values;
  };
  obj.evaluate = [&](const MlpParams& p) {
    RiskS1 r;
    r.data = ordered_sum(data_errors(p, s1.x_data, s1.z_data)) / static_cast<double>(s1.n_data());
    r.pde = ordered_sum(pde_errors(p, obs, s1.x_pde, terms)) / static_cast<double>(s1.n_pde());
    r.total = r.data + cfg.nu * r.pde;
    return r;
  };
  return run_training(init, cfg, obj);
}

std::pair<MlpParams, TrainReport> train_inverse(const DatasetS2& s2, const TrainConfig& cfg) {
  cfg.validate();
  if (s2.size() == 0) throw DomainError("train_inverse: empty S2");
  const auto n_z = static_cast<int>(s2.z.rows());
  const auto n_x = static_cast<int>(s2.x.rows());
  const MlpParams init =
      init_params(mlp_layout(n_z, cfg.hidden_layers, cfg.layer_size, n_x), derive_seed(cfg.seed, 2));

  Objective obj;
  obj.n_primary = s2.size();
  obj.primary_grad = [&](const MlpParams& p, std::span<const Eigen::Index> idx) {
    const Mat Z = gather(s2.z, idx);
    const Mat X = gather(s2.x, idx);
    return loss_gradient(p, Z, nullptr, regression_loss(X, 1.0 / static_cast<double>(idx.size())))
        .gradient.values;
  };
  obj.evaluate = [&](const MlpParams& p) {
    RiskS1 r;
    r.data = ordered_sum(data_errors(p, s2.z, s2.x)) / static_cast<double>(s2.size());
    r.total = r.data;
    return r;
  };
  return run_training(init, cfg, obj);
}

}  // namespace kkl
