#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "kkl/datagen.hpp"
#include "kkl/mlp.hpp"
#include "kkl/observer.hpp"
#include "kkl/systems.hpp"

namespace kkl {

struct TrainConfig {
  int hidden_layers = 3;
  int layer_size = 150;
  double learning_rate = 1e-3;
  double nu = 1.0;
  int epochs = 15;
  int batch_size = 256;
  std::uint64_t seed = 0;
  double weight_decay = 0.0;

  // Throws ConfigError.
  void validate() const;
};

// Losses are logged after each epoch on the full training set. `pde_loss` is
// the unweighted mean squared residual, so total = data + nu * pde.
struct TrainReport {
  std::vector<double> data_loss;
  std::vector<double> pde_loss;
  std::vector<double> total_loss;
  double initial_data_loss = 0.0;
  double initial_pde_loss = 0.0;
  double initial_total_loss = 0.0;
  int best_epoch = 0;  // 0 = initial parameters
  double wall_time_s = 0.0;
  std::uint64_t checksum = 0;
};

struct RiskS1 {
  double total = 0.0;
  double data = 0.0;
  double pde = 0.0;
};

// dT/dx(x) f(x) - A T(x) - B h(x)
Vec pde_residual(const MlpParams& theta, const ObserverMatrices& obs, const SystemModel& sys,
                 const Vec& x);

RiskS1 empirical_risk_s1(const MlpParams& theta, const DatasetS1& s1, const ObserverMatrices& obs,
                         const SystemModel& sys, double nu);

double empirical_risk_s2(const MlpParams& eta, const DatasetS2& s2);

// Gradient of empirical_risk_s1 over the full dataset, built from the same
// block losses the optimizer uses.
LossAndGradient risk_s1_gradient(const MlpParams& theta, const DatasetS1& s1,
                                 const ObserverMatrices& obs, const SystemModel& sys, double nu);

// Largest per-sample loss of each stage, used as the loss bound M.
double max_sample_loss_s1(const MlpParams& theta, const DatasetS1& s1,
                          const ObserverMatrices& obs, const SystemModel& sys, double nu);
double max_sample_loss_s2(const MlpParams& eta, const DatasetS2& s2);

std::pair<MlpParams, TrainReport> train_forward(const DatasetS1& s1, const ObserverMatrices& obs,
                                                const SystemModel& sys, const TrainConfig& cfg);

std::pair<MlpParams, TrainReport> train_inverse(const DatasetS2& s2, const TrainConfig& cfg);

// Adam with decoupled weight decay on weight matrices only.
class AdamOptimizer {
 public:
  AdamOptimizer(const MlpParams& shape, double learning_rate, double weight_decay = 0.0);

  void step(Vec& params, const Vec& grad);
  long long steps_taken() const { return t_; }

 private:
  double lr_;
  double decay_;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
  long long t_ = 0;
  Vec m_;
  Vec v_;
  Vec decay_mask_;  // 1 on weight entries, 0 on biases
};

}  // namespace kkl
