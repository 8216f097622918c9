#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "kkl/ode.hpp"

namespace kkl {

enum class SystemKind { Duffing, VanDerPol, Rossler, Lorenz };

// A benchmark plant x' = f(x), y = h(x). Immutable once built.
struct SystemModel {
  SystemKind kind = SystemKind::Duffing;
  std::string name;
  int n_x = 0;
  int n_y = 0;
  std::map<std::string, double> params;
  // RK4 steps per sample interval needed for stability at dt = 0.1.
  int substeps = 1;

  double param(const std::string& key) const;
};

// Accepted names: duffing | vanderpol | rossler | lorenz. `overrides` may
// only name parameters the plant already has.
SystemModel make_system(std::string_view name,
                        const std::map<std::string, double>& overrides = {});

std::vector<std::string> system_names();

Vec eval_dynamics(const SystemModel& sys, const Vec& x);
Vec eval_output(const SystemModel& sys, const Vec& x);
Mat eval_output_jacobian(const SystemModel& sys, const Vec& x);

VectorField dynamics_field(const SystemModel& sys);

// Gaussian process and measurement noise. Empty std vectors mean zero noise;
// a single entry is broadcast to every channel.
struct NoiseSpec {
  std::vector<double> w_std;
  std::vector<double> v_std;
  std::uint64_t seed = 0;

  bool has_process_noise() const;
  bool has_measurement_noise() const;
};

// Standard normal draw addressed by (seed, stream, step, channel). Pure
// function, so noise realizations can be regenerated in any order.
double gaussian_draw(std::uint64_t seed, std::uint64_t stream, std::uint64_t step,
                     std::uint64_t channel);

// Process disturbance w_k applied during integration step k.
Vec process_noise(const NoiseSpec& noise, int n_x, std::size_t step);
// Measurement noise v_k added to the k-th output sample.
Vec measurement_noise(const NoiseSpec& noise, int n_y, std::size_t step);

// x -> f(x) + w_k, w_k constant over step k.
StepField perturbed_dynamics(const SystemModel& sys, const NoiseSpec& noise);

Vec noisy_output(const SystemModel& sys, const Vec& x, const NoiseSpec& noise, std::size_t step);

}  // namespace kkl
