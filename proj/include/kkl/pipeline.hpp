#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "kkl/config.hpp"
#include "kkl/datagen.hpp"
#include "kkl/estimation.hpp"
#include "kkl/model_io.hpp"
#include "kkl/training.hpp"

namespace kkl {

// Output tree under cfg.output_dir:
//   data/     s_data.csv s_pde.csv s1.json s2.csv s2.json
//   models/   forward.json inverse.json *_report.json
//   runs/<scenario>/run_NNN.csv index.json [plots/]
//   metrics.json certificate.json ablation.json
struct Layout {
  std::filesystem::path root;
  std::filesystem::path data() const { return root / "data"; }
  std::filesystem::path models() const { return root / "models"; }
  std::filesystem::path forward_model() const { return models() / "forward.json"; }
  std::filesystem::path inverse_model() const { return models() / "inverse.json"; }
  std::filesystem::path runs(const std::string& scenario) const { return root / "runs" / scenario; }
};

SystemModel config_system(const PipelineConfig& cfg);
ObserverMatrices config_observer(const PipelineConfig& cfg);
S1Config s1_config(const PipelineConfig& cfg, const SystemModel& sys);
S2Config s2_config(const PipelineConfig& cfg, const DatasetS1& s1);

// Test scenarios: "clean" (in-domain, noise-free), "noisy" (in-domain with
// the configured noise) and "ood" (generalization box, noise-free).
struct Scenario {
  std::string name;
  Box box;
  NoiseSpec noise;
  std::uint64_t x0_seed = 0;
};
const std::vector<std::string>& scenario_names();
Scenario make_scenario(const PipelineConfig& cfg, const std::string& name);

// Rollouts of one scenario. The reference filter starts at theta(x0), so its
// error against the true lifted state is the forward-map error at x0.
std::vector<EstimationRun> run_scenario(const PipelineConfig& cfg, const SystemModel& sys,
                                        const ObserverMatrices& obs, const MlpParams& theta,
                                        const MlpParams& eta, const Scenario& sc);

DatasetS1 cmd_generate_data(const PipelineConfig& cfg);

struct TrainOutcome {
  ModelFile model;
  TrainReport report;
};
TrainOutcome cmd_train_forward(const PipelineConfig& cfg);
// Reuses data/s2.* when it was generated from the current forward model,
// otherwise regenerates it.
TrainOutcome cmd_train_inverse(const PipelineConfig& cfg);

void cmd_simulate(const PipelineConfig& cfg, const std::vector<std::string>& scenarios,
                  bool emit_plot_data);

struct Certificate {
  Json json;
  bool pass = true;  // every applicable check holds
};
Certificate cmd_bounds(const PipelineConfig& cfg);

struct Evaluation {
  Json metrics;
  Certificate certificate;
};
Evaluation cmd_evaluate(const PipelineConfig& cfg);

Json cmd_ablate(const PipelineConfig& cfg);

}  // namespace kkl
