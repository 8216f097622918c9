#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "kkl/datagen.hpp"
#include "kkl/model_io.hpp"
#include "kkl/training.hpp"

namespace kkl {

struct ObserverConfig {
  double lambda_lo = -2.0;
  double lambda_hi = -0.5;
  double eps = 1e-4;
};

struct DataConfig {
  std::size_t p = 100;
  std::size_t q = 100;
  double T = 50.0;
  double dt = 0.1;
  double min_truncation_fraction = 0.1;
  Box x_box;
  std::optional<Box> z_box;  // unset: sized from eps
  std::uint64_t seed = 0;
  std::size_t n2 = 0;        // 0: N_data + N_pde
  std::optional<Box> s2_box;  // unset: bounding box of the S1 states
  S2Mode s2_mode = S2Mode::IidPoints;
};

struct EvalConfig {
  std::size_t n_test = 100;
  double T = 50.0;
  double dt = 0.1;
  Box test_box;
  Box ood_box;
  std::vector<double> w_std{0.0};
  std::vector<double> v_std{0.1};
  std::uint64_t seed = 0;        // test initial conditions
  std::uint64_t noise_seed = 0;
  double t_cutoff = 0.0;         // headline metrics
  double tail_cutoff = 25.0;     // transient-excluded metrics and bound checks
  double delta = 0.05;
  double d_theta = 0.0;          // 0: parameter count
  double d_eta = 0.0;
  std::size_t ell_h_samples = 1000;
};

struct AblationConfig {
  std::vector<std::uint64_t> seeds{0, 1, 2};
};

struct PipelineConfig {
  std::string system;
  std::map<std::string, double> system_params;
  ObserverConfig observer;
  DataConfig data;
  TrainConfig train_forward;
  TrainConfig train_inverse;
  EvalConfig eval;
  AblationConfig ablation;
  std::filesystem::path output_dir = "out";

  Json to_json() const;
};

// Per-system defaults: [-1,1] sampling boxes, [-3,3] generalization box and
// the architecture/training table of the reference experiments.
Json default_config_json(const std::string& system);

struct ConfigSources {
  std::optional<std::filesystem::path> file;
  std::optional<std::string> system;          // --system
  std::vector<std::string> assignments;       // --set /path=value
  std::optional<std::filesystem::path> output_dir;
  bool use_env_seed = true;                   // honour KKL_SEED
};

// Resolution order: per-system defaults, then the file, then flags, then
// KKL_SEED. Errors are ConfigError with a JSON pointer to the field.
PipelineConfig resolve_config(const ConfigSources& sources);
PipelineConfig config_from_json(const Json& j);

// Sets every seed in the config from one value.
void override_seeds(PipelineConfig& cfg, std::uint64_t seed);

}  // namespace kkl
