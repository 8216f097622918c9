#include "kkl/systems.hpp"

#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "kkl/error.hpp"

namespace kkl {

namespace {

void check_state_dim(const SystemModel& sys, const Vec& x) {
  if (x.size() != sys.n_x) {
    throw DimensionError(
        fmt::format("{}: state has dimension {}, expected {}", sys.name, x.size(), sys.n_x));
  }
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Uniform in (0, 1), never exactly zero.
double to_unit(std::uint64_t bits) {
  return (static_cast<double>(bits >> 11) + 0.5) * (1.0 / 9007199254740992.0);
}

double channel_std(const std::vector<double>& stds, std::size_t channel) {
  if (stds.empty()) return 0.0;
  if (stds.size() == 1) return stds.front();
  return stds.at(channel);
}

constexpr std::uint64_t kProcessStream = 1;
constexpr std::uint64_t kMeasurementStream = 2;

}  // namespace

double SystemModel::param(const std::string& key) const {
  const auto it = params.find(key);
  if (it == params.end()) {
    throw ConfigError(fmt::format("{}: unknown parameter '{}'", name, key));
  }
  return it->second;
}

std::vector<std::string> system_names() { return {"duffing", "vanderpol", "rossler", "lorenz"}; }

SystemModel make_system(std::string_view name, const std::map<std::string, double>& overrides) {
  SystemModel sys;
  sys.name = std::string(name);
  sys.n_y = 1;
  if (name == "duffing") {
    sys.kind = SystemKind::Duffing;
    sys.n_x = 2;
  } else if (name == "vanderpol") {
    sys.kind = SystemKind::VanDerPol;
    sys.n_x = 2;
    sys.params = {{"mu", 3.0}};
  } else if (name == "rossler") {
    sys.kind = SystemKind::Rossler;
    sys.n_x = 3;
    sys.params = {{"a", 0.2}, {"b", 0.2}, {"c", 5.7}};
  } else if (name == "lorenz") {
    sys.kind = SystemKind::Lorenz;
    sys.n_x = 3;
    sys.params = {{"p", 28.0}, {"q", 10.0}, {"r", 8.0 / 3.0}};
    sys.substeps = 4;
  } else {
    throw ConfigError(fmt::format(
        "unknown system '{}' (expected duffing | vanderpol | rossler | lorenz)", name));
  }
  for (const auto& [key, value] : overrides) {
    if (!sys.params.contains(key)) {
      throw ConfigError(fmt::format("{}: cannot override unknown parameter '{}'", name, key));
    }
    sys.params[key] = value;
  }
  return sys;
}

Vec eval_dynamics(const SystemModel& sys, const Vec& x) {
  check_state_dim(sys, x);
  Vec dx(sys.n_x);
  switch (sys.kind) {
    case SystemKind::Duffing:
      dx << x[1] * x[1] * x[1], -x[0];
      break;
    case SystemKind::VanDerPol: {
      const double mu = sys.param("mu");
      dx << x[1], mu * (1.0 - x[0] * x[0]) * x[1] - x[0];
      break;
    }
    case SystemKind::Rossler: {
      const double a = sys.param("a"), b = sys.param("b"), c = sys.param("c");
      dx << -x[1] - x[2], x[0] + a * x[1], b + x[2] * (x[0] - c);
      break;
    }
    case SystemKind::Lorenz: {
      const double p = sys.param("p"), q = sys.param("q"), r = sys.param("r");
      dx << p * (x[1] - x[0]), x[0] * (q - x[2]) - x[1], x[0] * x[1] - r * x[2];
      break;
    }
  }
  return dx;
}

Vec eval_output(const SystemModel& sys, const Vec& x) {
  check_state_dim(sys, x);
  Vec y(1);
  switch (sys.kind) {
    case SystemKind::Duffing:
    case SystemKind::VanDerPol:
      y[0] = x[0];
      break;
    case SystemKind::Rossler:
    case SystemKind::Lorenz:
      y[0] = x[1];
      break;
  }
  return y;
}

Mat eval_output_jacobian(const SystemModel& sys, const Vec& x) {
  check_state_dim(sys, x);
  Mat jac = Mat::Zero(sys.n_y, sys.n_x);
  switch (sys.kind) {
    case SystemKind::Duffing:
    case SystemKind::VanDerPol:
      jac(0, 0) = 1.0;
      break;
    case SystemKind::Rossler:
    case SystemKind::Lorenz:
      jac(0, 1) = 1.0;
      break;
  }
  return jac;
}

VectorField dynamics_field(const SystemModel& sys) {
  return [sys](const Vec& x) { return eval_dynamics(sys, x); };
}

bool NoiseSpec::has_process_noise() const {
  for (double s : w_std) {
    if (s > 0.0) return true;
  }
  return false;
}

bool NoiseSpec::has_measurement_noise() const {
  for (double s : v_std) {
    if (s > 0.0) return true;
  }
  return false;
}

double gaussian_draw(std::uint64_t seed, std::uint64_t stream, std::uint64_t step,
                     std::uint64_t channel) {
  std::uint64_t key = splitmix64(seed);
  key = splitmix64(key ^ stream);
  key = splitmix64(key ^ step);
  key = splitmix64(key ^ channel);
  const double u1 = to_unit(key);
  const double u2 = to_unit(splitmix64(key));
  // Box-Muller, cosine branch.
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Vec process_noise(const NoiseSpec& noise, int n_x, std::size_t step) {
  Vec w = Vec::Zero(n_x);
  for (int i = 0; i < n_x; ++i) {
    const double sd = channel_std(noise.w_std, static_cast<std::size_t>(i));
    if (sd < 0.0) throw DomainError("process noise std must be nonnegative");
    if (sd > 0.0) w[i] = sd * gaussian_draw(noise.seed, kProcessStream, step, i);
  }
  return w;
}

Vec measurement_noise(const NoiseSpec& noise, int n_y, std::size_t step) {
  Vec v = Vec::Zero(n_y);
  for (int i = 0; i < n_y; ++i) {
    const double sd = channel_std(noise.v_std, static_cast<std::size_t>(i));
    if (sd < 0.0) throw DomainError("measurement noise std must be nonnegative");
    if (sd > 0.0) v[i] = sd * gaussian_draw(noise.seed, kMeasurementStream, step, i);
  }
  return v;
}

StepField perturbed_dynamics(const SystemModel& sys, const NoiseSpec& noise) {
  if (!noise.has_process_noise()) {
    return [sys](std::size_t, const Vec& x) { return eval_dynamics(sys, x); };
  }
  return [sys, noise](std::size_t step, const Vec& x) {
    return Vec(eval_dynamics(sys, x) + process_noise(noise, sys.n_x, step));
  };
}

Vec noisy_output(const SystemModel& sys, const Vec& x, const NoiseSpec& noise, std::size_t step) {
  return eval_output(sys, x) + measurement_noise(noise, sys.n_y, step);
}

}  // namespace kkl
