#include "kkl/config.hpp"

#include <cstdlib>
#include <set>

#include <fmt/format.h>

#include "kkl/error.hpp"
#include "kkl/systems.hpp"

namespace kkl {

namespace {

struct TableRow {
  int hidden_layers;
  int layer_size;
  std::size_t p;
  double v_std;
};

TableRow table_row(const std::string& system) {
  if (system == "duffing") return {3, 150, 100, 0.1};
  if (system == "vanderpol") return {2, 350, 100, 0.1};
  if (system == "rossler") return {3, 250, 200, 0.1};
  if (system == "lorenz") return {2, 350, 200, 2.0};
  throw ConfigError(fmt::format("/system: unknown system '{}'", system));
}

Json train_json(const TrainConfig& t) {
  Json j;
  j["hidden_layers"] = t.hidden_layers;
  j["layer_size"] = t.layer_size;
  j["learning_rate"] = t.learning_rate;
  j["nu"] = t.nu;
  j["epochs"] = t.epochs;
  j["batch_size"] = t.batch_size;
  j["seed"] = t.seed;
  j["weight_decay"] = t.weight_decay;
  return j;
}

Json box_json(const Box& b) {
  Json j;
  j["lo"] = std::vector<double>(b.lo.data(), b.lo.data() + b.lo.size());
  j["hi"] = std::vector<double>(b.hi.data(), b.hi.data() + b.hi.size());
  return j;
}

// Field reader that reports the JSON pointer of whatever it rejects and
// refuses keys it was never asked about.
class Section {
 public:
  Section(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail("", "expected an object");
  }

  ~Section() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) fail(key, "unknown field");
    }
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }

  const Json& raw(const std::string& key) {
    if (!has(key)) fail(key, "missing");
    return j_.at(key);
  }

  std::string field(const std::string& key) const { return path_ + "/" + key; }

  template <typename T>
  T get(const std::string& key) {
    const Json& v = raw(key);
    try {
      if constexpr (std::is_same_v<T, std::string>) {
        if (!v.is_string()) fail(key, "expected a string");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) fail(key, "expected an integer");
        if (std::is_unsigned_v<T> && v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0) {
          fail(key, "must be nonnegative");
        }
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) fail(key, "expected a number");
      }
      return v.get<T>();
    } catch (const nlohmann::json::exception& e) {
      fail(key, e.what());
    }
  }

  std::vector<double> doubles(const std::string& key) {
    const Json& v = raw(key);
    if (v.is_number()) return {v.get<double>()};
    if (!v.is_array() || v.empty()) fail(key, "expected a number or a nonempty array");
    std::vector<double> out;
    for (const auto& e : v) {
      if (!e.is_number()) fail(key, "expected numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }

  // A number h means [-h, h]^dim; an object gives explicit lo/hi arrays.
  Box box(const std::string& key, int dim) {
    const Json& v = raw(key);
    if (v.is_number()) {
      const double h = v.get<double>();
      if (!(h > 0.0)) fail(key, "half width must be positive");
      return Box::symmetric(dim, h);
    }
    Section s(v, field(key));
    const auto lo = s.doubles("lo");
    const auto hi = s.doubles("hi");
    if (lo.size() != static_cast<std::size_t>(dim) || hi.size() != static_cast<std::size_t>(dim)) {
      fail(key, fmt::format("expected {} bounds per side", dim));
    }
    Box b{Eigen::Map<const Vec>(lo.data(), dim), Eigen::Map<const Vec>(hi.data(), dim)};
    if (!(b.lo.array() < b.hi.array()).all()) fail(key, "lo must be below hi");
    return b;
  }

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    throw ConfigError(fmt::format("{}: {}", key.empty() ? path_ : field(key), what));
  }

 private:
  const Json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

TrainConfig read_train(const Json& j, const std::string& path) {
  Section s(j, path);
  TrainConfig t;
  t.hidden_layers = s.get<int>("hidden_layers");
  t.layer_size = s.get<int>("layer_size");
  t.learning_rate = s.get<double>("learning_rate");
  t.nu = s.get<double>("nu");
  t.epochs = s.get<int>("epochs");
  t.batch_size = s.get<int>("batch_size");
  t.seed = s.get<std::uint64_t>("seed");
  t.weight_decay = s.get<double>("weight_decay");
  try {
    t.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(fmt::format("{}: {}", path, e.what()));
  }
  return t;
}

// Parses `value` as JSON where possible so numbers and arrays keep their
// type; anything else is taken as a string.
Json parse_value(const std::string& value) {
  try {
    return Json::parse(value);
  } catch (const nlohmann::json::exception&) {
    return Json(value);
  }
}

void apply_assignment(Json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError(fmt::format("--set '{}': expected path=value", assignment));
  }
  std::string path = assignment.substr(0, eq);
  // Dotted paths are accepted as a convenience: data.p == /data/p.
  if (path.front() != '/') {
    for (auto& c : path) c = c == '.' ? '/' : c;
    path = "/" + path;
  }
  try {
    j[Json::json_pointer(path)] = parse_value(assignment.substr(eq + 1));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(fmt::format("--set {}: {}", path, e.what()));
  }
}

}  // namespace

Json default_config_json(const std::string& system) {
  const TableRow row = table_row(system);
  const SystemModel sys = make_system(system);
  PipelineConfig cfg;
  cfg.system = system;
  cfg.data.p = row.p;
  cfg.data.q = row.p;
  cfg.data.x_box = Box::symmetric(sys.n_x, 1.0);
  TrainConfig t;
  t.hidden_layers = row.hidden_layers;
  t.layer_size = row.layer_size;
  t.learning_rate = 1e-3;
  t.nu = 1.0;
  t.epochs = 15;
  cfg.train_forward = t;
  cfg.train_inverse = t;
  cfg.train_inverse.seed = 1;
  cfg.eval.test_box = Box::symmetric(sys.n_x, 1.0);
  cfg.eval.ood_box = Box::symmetric(sys.n_x, 3.0);
  cfg.eval.v_std = {row.v_std};
  cfg.eval.seed = 2;
  cfg.eval.noise_seed = 3;
  return cfg.to_json();
}

Json PipelineConfig::to_json() const {
  Json j;
  j["system"] = system;
  Json params = Json::object();
  for (const auto& [k, v] : system_params) params[k] = v;
  j["system_params"] = params;

  Json o;
  o["lambda_lo"] = observer.lambda_lo;
  o["lambda_hi"] = observer.lambda_hi;
  o["eps"] = observer.eps;
  j["observer"] = o;

  Json d;
  d["p"] = data.p;
  d["q"] = data.q;
  d["T"] = data.T;
  d["dt"] = data.dt;
  d["min_truncation_fraction"] = data.min_truncation_fraction;
  d["x_box"] = box_json(data.x_box);
  d["z_box"] = data.z_box ? box_json(*data.z_box) : Json(nullptr);
  d["seed"] = data.seed;
  d["n2"] = data.n2;
  d["s2_box"] = data.s2_box ? box_json(*data.s2_box) : Json(nullptr);
  d["s2_mode"] = to_string(data.s2_mode);
  j["data"] = d;

  j["train_forward"] = train_json(train_forward);
  j["train_inverse"] = train_json(train_inverse);

  Json e;
  e["n_test"] = eval.n_test;
  e["T"] = eval.T;
  e["dt"] = eval.dt;
  e["test_box"] = box_json(eval.test_box);
  e["ood_box"] = box_json(eval.ood_box);
  e["w_std"] = eval.w_std;
  e["v_std"] = eval.v_std;
  e["seed"] = eval.seed;
  e["noise_seed"] = eval.noise_seed;
  e["t_cutoff"] = eval.t_cutoff;
  e["tail_cutoff"] = eval.tail_cutoff;
  e["delta"] = eval.delta;
  e["d_theta"] = eval.d_theta;
  e["d_eta"] = eval.d_eta;
  e["ell_h_samples"] = eval.ell_h_samples;
  j["evaluation"] = e;

  Json a;
  a["seeds"] = ablation.seeds;
  j["ablation"] = a;

  j["output_dir"] = output_dir.string();
  return j;
}

PipelineConfig config_from_json(const Json& j) {
  PipelineConfig cfg;
  Section root(j, "");
  cfg.system = root.get<std::string>("system");
  std::map<std::string, double> overrides;
  if (root.has("system_params")) {
    const Json& sp = root.raw("system_params");
    if (!sp.is_object()) root.fail("system_params", "expected an object");
    for (const auto& [k, v] : sp.items()) {
      if (!v.is_number()) throw ConfigError(fmt::format("/system_params/{}: expected a number", k));
      overrides[k] = v.get<double>();
    }
  }
  SystemModel sys;
  try {
    sys = make_system(cfg.system, overrides);
  } catch (const ConfigError& e) {
    throw ConfigError(fmt::format("/system: {}", e.what()));
  }
  cfg.system_params = overrides;

  {
    Section s(root.raw("observer"), "/observer");
    cfg.observer.lambda_lo = s.get<double>("lambda_lo");
    cfg.observer.lambda_hi = s.get<double>("lambda_hi");
    cfg.observer.eps = s.get<double>("eps");
    if (!(cfg.observer.lambda_lo < cfg.observer.lambda_hi)) s.fail("lambda_lo", "must be below lambda_hi");
    if (!(cfg.observer.lambda_hi < 0.0)) s.fail("lambda_hi", "must be negative");
    if (!(cfg.observer.eps > 0.0)) s.fail("eps", "must be positive");
  }
  const int n_z = sys.n_y * (2 * sys.n_x + 1);
  {
    Section s(root.raw("data"), "/data");
    auto& d = cfg.data;
    d.p = s.get<std::size_t>("p");
    d.q = s.get<std::size_t>("q");
    d.T = s.get<double>("T");
    d.dt = s.get<double>("dt");
    d.min_truncation_fraction = s.get<double>("min_truncation_fraction");
    d.x_box = s.box("x_box", sys.n_x);
    if (s.has("z_box")) d.z_box = s.box("z_box", n_z);
    d.seed = s.get<std::uint64_t>("seed");
    d.n2 = s.get<std::size_t>("n2");
    if (s.has("s2_box")) d.s2_box = s.box("s2_box", sys.n_x);
    try {
      d.s2_mode = s2_mode_from_string(s.get<std::string>("s2_mode"));
    } catch (const ConfigError& e) {
      s.fail("s2_mode", e.what());
    }
    if (d.p < 1) s.fail("p", "must be at least 1");
    if (!(d.dt > 0.0)) s.fail("dt", "must be positive");
    if (!(d.T >= d.dt)) s.fail("T", "must be at least dt");
    if (!(d.min_truncation_fraction >= 0.0 && d.min_truncation_fraction < 1.0)) {
      s.fail("min_truncation_fraction", "must be in [0, 1)");
    }
  }
  cfg.train_forward = read_train(root.raw("train_forward"), "/train_forward");
  cfg.train_inverse = read_train(root.raw("train_inverse"), "/train_inverse");
  {
    Section s(root.raw("evaluation"), "/evaluation");
    auto& e = cfg.eval;
    e.n_test = s.get<std::size_t>("n_test");
    e.T = s.get<double>("T");
    e.dt = s.get<double>("dt");
    e.test_box = s.box("test_box", sys.n_x);
    e.ood_box = s.box("ood_box", sys.n_x);
    e.w_std = s.doubles("w_std");
    e.v_std = s.doubles("v_std");
    e.seed = s.get<std::uint64_t>("seed");
    e.noise_seed = s.get<std::uint64_t>("noise_seed");
    e.t_cutoff = s.get<double>("t_cutoff");
    e.tail_cutoff = s.get<double>("tail_cutoff");
    e.delta = s.get<double>("delta");
    e.d_theta = s.get<double>("d_theta");
    e.d_eta = s.get<double>("d_eta");
    e.ell_h_samples = s.get<std::size_t>("ell_h_samples");
    if (e.n_test < 1) s.fail("n_test", "must be at least 1");
    if (!(e.dt > 0.0)) s.fail("dt", "must be positive");
    if (!(e.T >= e.dt)) s.fail("T", "must be at least dt");
    for (double w : e.w_std) {
      if (!(w >= 0.0)) s.fail("w_std", "must be nonnegative");
    }
    for (double v : e.v_std) {
      if (!(v >= 0.0)) s.fail("v_std", "must be nonnegative");
    }
    if (e.w_std.size() != 1 && e.w_std.size() != static_cast<std::size_t>(sys.n_x)) {
      s.fail("w_std", fmt::format("expected 1 or {} entries", sys.n_x));
    }
    if (e.v_std.size() != 1 && e.v_std.size() != static_cast<std::size_t>(sys.n_y)) {
      s.fail("v_std", fmt::format("expected 1 or {} entries", sys.n_y));
    }
    if (!(e.t_cutoff >= 0.0 && e.t_cutoff < e.T)) s.fail("t_cutoff", "must be in [0, T)");
    if (!(e.tail_cutoff >= 0.0 && e.tail_cutoff < e.T)) s.fail("tail_cutoff", "must be in [0, T)");
    if (!(e.delta > 0.0 && e.delta < 1.0)) s.fail("delta", "must be in (0, 1)");
    if (e.d_theta < 0.0) s.fail("d_theta", "must be nonnegative");
    if (e.d_eta < 0.0) s.fail("d_eta", "must be nonnegative");
    if (e.ell_h_samples < 1) s.fail("ell_h_samples", "must be at least 1");
  }
  {
    Section s(root.raw("ablation"), "/ablation");
    const Json& seeds = s.raw("seeds");
    if (!seeds.is_array() || seeds.empty()) s.fail("seeds", "expected a nonempty array");
    cfg.ablation.seeds.clear();
    for (const auto& v : seeds) {
      if (!v.is_number_unsigned()) s.fail("seeds", "expected nonnegative integers");
      cfg.ablation.seeds.push_back(v.get<std::uint64_t>());
    }
  }
  cfg.output_dir = root.get<std::string>("output_dir");
  return cfg;
}

void override_seeds(PipelineConfig& cfg, std::uint64_t seed) {
  cfg.data.seed = seed;
  cfg.train_forward.seed = derive_seed(seed, 1);
  cfg.train_inverse.seed = derive_seed(seed, 2);
  cfg.eval.seed = derive_seed(seed, 3);
  cfg.eval.noise_seed = derive_seed(seed, 4);
  for (std::size_t i = 0; i < cfg.ablation.seeds.size(); ++i) cfg.ablation.seeds[i] = derive_seed(seed, 100 + i);
}

PipelineConfig resolve_config(const ConfigSources& sources) {
  Json file = Json::object();
  if (sources.file) {
    try {
      file = read_json(*sources.file);
    } catch (const IoError& e) {
      throw ConfigError(e.what());
    }
    if (!file.is_object()) throw ConfigError(fmt::format("{}: expected a JSON object", sources.file->string()));
  }
  std::string system;
  if (sources.system) {
    system = *sources.system;
  } else if (file.contains("system")) {
    if (!file["system"].is_string()) throw ConfigError("/system: expected a string");
    system = file["system"].get<std::string>();
  }
  // The system may also arrive through --set.
  for (const auto& a : sources.assignments) {
    for (const std::string prefix : {"/system=", "system="}) {
      if (a.rfind(prefix, 0) == 0) system = parse_value(a.substr(prefix.size())).get<std::string>();
    }
  }
  if (system.empty()) throw ConfigError("/system: missing");

  Json merged = default_config_json(system);
  merged.merge_patch(file);
  merged["system"] = system;
  for (const auto& a : sources.assignments) apply_assignment(merged, a);
  if (sources.output_dir) merged["output_dir"] = sources.output_dir->string();

  PipelineConfig cfg = config_from_json(merged);
  if (sources.use_env_seed) {
    if (const char* env = std::getenv("KKL_SEED"); env != nullptr && *env != '\0') {
      std::uint64_t seed = 0;
      try {
        std::size_t used = 0;
        seed = std::stoull(env, &used);
        if (env[used] != '\0') throw std::invalid_argument("trailing characters");
      } catch (const std::exception&) {
        throw ConfigError(fmt::format("KKL_SEED: not an unsigned integer: '{}'", env));
      }
      override_seeds(cfg, seed);
    }
  }
  return cfg;
}

}  // namespace kkl
