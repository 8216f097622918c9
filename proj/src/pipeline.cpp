#include "kkl/pipeline.hpp"

#include <fmt/format.h>

#include "kkl/bounds.hpp"
#include "kkl/error.hpp"
#include "kkl/parallel.hpp"

namespace kkl {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kStreamInDomainX0 = 1;
constexpr std::uint64_t kStreamOodX0 = 2;
constexpr std::uint64_t kStreamEllH = 3;

Json vec_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Json box_json(const Box& b) {
  Json j;
  j["lo"] = vec_json(b.lo);
  j["hi"] = vec_json(b.hi);
  return j;
}

Json report_json(const TrainReport& r, const MlpParams& net) {
  Json j;
  j["initial_data_loss"] = r.initial_data_loss;
  j["initial_pde_loss"] = r.initial_pde_loss;
  j["initial_total_loss"] = r.initial_total_loss;
  j["data_loss"] = r.data_loss;
  j["pde_loss"] = r.pde_loss;
  j["total_loss"] = r.total_loss;
  j["best_epoch"] = r.best_epoch;
  j["parameter_count"] = net.parameter_count();
  j["checksum"] = fmt::format("{:016x}", r.checksum);
  return j;
}

bool same_observer(const ObserverMatrices& a, const ObserverMatrices& b) {
  return a.n_z == b.n_z && a.eigenvalues.size() == b.eigenvalues.size() && a.eigenvalues == b.eigenvalues &&
         a.B.rows() == b.B.rows() && a.B.cols() == b.B.cols() && a.B == b.B;
}

void require_observer(const ModelFile& model, const ObserverMatrices& expected, const std::string& what) {
  if (!same_observer(model.observer, expected)) {
    throw ConfigError(fmt::format("{}: observer block does not match /observer of the current config", what));
  }
}

ModelFile load_model(const fs::path& path, const std::string& role) {
  if (!fs::exists(path)) {
    throw IoError(fmt::format("{} not found; run train-{} first", path.string(), role));
  }
  ModelFile m = read_model(path);
  if (m.role != role) throw IoError(fmt::format("{}: expected a {} model, found '{}'", path.string(), role, m.role));
  return m;
}

DatasetS1 load_s1(const Layout& layout) {
  if (!fs::exists(layout.data() / "s1.json")) {
    throw IoError(fmt::format("{} has no S1 dataset; run generate-data first", layout.data().string()));
  }
  return read_dataset_s1(layout.data());
}

Json s2_config_json(const S2Config& c) {
  Json j;
  j["n2"] = c.n2;
  j["x_box"] = box_json(c.x_box);
  j["mode"] = to_string(c.mode);
  j["dt"] = c.dt;
  j["T"] = c.T;
  j["seed"] = c.seed;
  return j;
}

struct LoadedRuns {
  std::vector<EstimationRun> runs;
  Json index;
};

LoadedRuns load_runs(const Layout& layout, const std::string& scenario, const SystemModel& sys,
                     const ObserverMatrices& obs) {
  LoadedRuns out;
  const fs::path dir = layout.runs(scenario);
  if (!fs::exists(dir / "index.json")) return out;
  out.index = read_json(dir / "index.json");
  for (const auto& entry : out.index.at("runs")) {
    EstimationRun run = read_run_csv(dir / entry.at("file").get<std::string>(), sys.n_x, obs.n_z, sys.n_y);
    run.w_bar = entry.at("w_bar").get<double>();
    run.v_bar = entry.at("v_bar").get<double>();
    out.runs.push_back(std::move(run));
  }
  return out;
}

Json metrics_json(const MetricsReport& m) {
  Json j;
  j["t_cutoff"] = m.t_cutoff;
  j["rmse"] = m.rmse;
  j["smape_percent"] = m.smape;
  j["samples"] = m.samples;
  j["degenerate_samples"] = m.degenerate_samples;
  j["run_rmse"] = m.run_rmse;
  j["run_smape_percent"] = m.run_smape;
  return j;
}

// Complexity term when it is defined, otherwise null with the reason.
Json complexity_or_null(double M, double d, double N, double delta, double* value) {
  Json j;
  j["M"] = M;
  j["d"] = d;
  j["N"] = N;
  j["delta"] = delta;
  if (N >= d && d >= 1.0) {
    *value = complexity_term(M, d, N, delta);
    j["value"] = *value;
  } else {
    *value = -1.0;
    j["value"] = nullptr;
    j["note"] = fmt::format("not defined: N = {} is below d = {}", N, d);
  }
  return j;
}

Json check_json(const std::string& name, bool applicable, bool pass, double lhs, double rhs,
                const std::string& note) {
  Json j;
  j["name"] = name;
  j["applicable"] = applicable;
  j["pass"] = applicable ? Json(pass) : Json(nullptr);
  j["empirical"] = applicable ? Json(lhs) : Json(nullptr);
  j["bound"] = applicable ? Json(rhs) : Json(nullptr);
  j["margin"] = applicable ? Json(rhs - lhs) : Json(nullptr);
  j["note"] = note;
  return j;
}

Json envelope_json(const std::string& name, const std::vector<EstimationRun>& runs,
                   const ObserverMatrices& obs, double ell_h, bool* pass) {
  if (runs.empty()) return check_json(name, false, true, 0, 0, "no runs on disk for this scenario");
  bool ok = true;
  double min_margin = std::numeric_limits<double>::infinity();
  std::size_t worst_run = 0, worst_index = 0;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    // psi is the identity on w_bar.
    const EnvelopeCheck c = z_error_envelope_check(runs[i], obs, ell_h, runs[i].w_bar, runs[i].v_bar);
    ok = ok && c.pass;
    if (c.min_margin < min_margin) {
      min_margin = c.min_margin;
      worst_run = i;
      worst_index = c.worst_index;
    }
  }
  *pass = *pass && ok;
  Json j;
  j["name"] = name;
  j["applicable"] = true;
  j["pass"] = ok;
  j["runs"] = runs.size();
  j["min_margin"] = min_margin;
  j["worst_run"] = worst_run;
  j["worst_sample"] = worst_index;
  j["note"] = "filter error against the clean-output reference filter, every sample";
  return j;
}

double max_over(const std::vector<EstimationRun>& runs, double EstimationRun::*field) {
  double m = 0.0;
  for (const auto& r : runs) m = std::max(m, r.*field);
  return m;
}

}  // namespace

SystemModel config_system(const PipelineConfig& cfg) { return make_system(cfg.system, cfg.system_params); }

ObserverMatrices config_observer(const PipelineConfig& cfg) {
  const SystemModel sys = config_system(cfg);
  return build_observer(sys.n_x, sys.n_y, cfg.observer.lambda_lo, cfg.observer.lambda_hi);
}

S1Config s1_config(const PipelineConfig& cfg, const SystemModel& sys) {
  S1Config c;
  c.p = cfg.data.p;
  c.q = cfg.data.q;
  c.T = cfg.data.T;
  c.dt = cfg.data.dt;
  c.eps = cfg.observer.eps;
  c.min_truncation_fraction = cfg.data.min_truncation_fraction;
  c.x_box = cfg.data.x_box;
  if (cfg.data.z_box) c.z_box = *cfg.data.z_box;
  c.seed = cfg.data.seed;
  if (c.x_box.dim() != sys.n_x) throw ConfigError("/data/x_box: dimension does not match the system");
  return c;
}

S2Config s2_config(const PipelineConfig& cfg, const DatasetS1& s1) {
  S2Config c;
  c.n2 = cfg.data.n2 > 0 ? cfg.data.n2 : s1.n_data() + s1.n_pde();
  c.x_box = cfg.data.s2_box ? *cfg.data.s2_box : bounding_box({&s1.x_data, &s1.x_pde});
  c.mode = cfg.data.s2_mode;
  c.dt = cfg.data.dt;
  c.T = cfg.data.T;
  c.seed = cfg.data.seed;
  return c;
}

const std::vector<std::string>& scenario_names() {
  static const std::vector<std::string> names{"clean", "noisy", "ood"};
  return names;
}

Scenario make_scenario(const PipelineConfig& cfg, const std::string& name) {
  Scenario sc;
  sc.name = name;
  sc.noise.seed = cfg.eval.noise_seed;
  if (name == "clean" || name == "noisy") {
    sc.box = cfg.eval.test_box;
    sc.x0_seed = derive_seed(cfg.eval.seed, kStreamInDomainX0);
    if (name == "noisy") {
      sc.noise.w_std = cfg.eval.w_std;
      sc.noise.v_std = cfg.eval.v_std;
    }
  } else if (name == "ood") {
    sc.box = cfg.eval.ood_box;
    sc.x0_seed = derive_seed(cfg.eval.seed, kStreamOodX0);
  } else {
    throw ConfigError(fmt::format("unknown scenario '{}' (expected clean, noisy or ood)", name));
  }
  return sc;
}

std::vector<EstimationRun> run_scenario(const PipelineConfig& cfg, const SystemModel& sys,
                                        const ObserverMatrices& obs, const MlpParams& theta,
                                        const MlpParams& eta, const Scenario& sc) {
  const Mat x0 = sample_box(cfg.eval.n_test, sc.box, sc.x0_seed);
  std::vector<EstimationRun> runs(cfg.eval.n_test);
  parallel_for(runs.size(), [&](std::size_t i) {
    SimulateOptions opts;
    opts.noise = sc.noise;
    opts.noise.seed = derive_seed(sc.noise.seed, i);
    opts.T = cfg.eval.T;
    opts.dt = cfg.eval.dt;
    opts.z0 = Vec::Zero(obs.n_z);
    opts.z_ref0 = forward(theta, x0.col(static_cast<Eigen::Index>(i)));
    runs[i] = simulate_observer(sys, obs, eta, x0.col(static_cast<Eigen::Index>(i)), opts);
  });
  return runs;
}

DatasetS1 cmd_generate_data(const PipelineConfig& cfg) {
  const SystemModel sys = config_system(cfg);
  const ObserverMatrices obs = config_observer(cfg);
  DatasetS1 s1 = generate_s1(sys, obs, s1_config(cfg, sys));
  Json side;
  side["system"] = cfg.system;
  side["observer"] = to_json(obs);
  side["config"] = cfg.to_json();
  write_dataset_s1(Layout{cfg.output_dir}.data(), s1, side);
  return s1;
}

TrainOutcome cmd_train_forward(const PipelineConfig& cfg) {
  const Layout layout{cfg.output_dir};
  const SystemModel sys = config_system(cfg);
  const ObserverMatrices obs = config_observer(cfg);
  const DatasetS1 s1 = load_s1(layout);
  if (s1.x0.rows() != sys.n_x || s1.z0.rows() != obs.n_z) {
    throw ConfigError("S1 dataset dimensions do not match the configured system");
  }
  auto [theta, report] = train_forward(s1, obs, sys, cfg.train_forward);
  TrainOutcome out{ModelFile{"forward", std::move(theta), obs, cfg.to_json()}, std::move(report)};
  write_model(layout.forward_model(), out.model);
  Json rep = report_json(out.report, out.model.net);
  rep["config"] = cfg.to_json();
  write_json(layout.models() / "forward_report.json", rep);
  return out;
}

TrainOutcome cmd_train_inverse(const PipelineConfig& cfg) {
  const Layout layout{cfg.output_dir};
  const SystemModel sys = config_system(cfg);
  const ObserverMatrices obs = config_observer(cfg);
  const ModelFile fwd = load_model(layout.forward_model(), "forward");
  require_observer(fwd, obs, layout.forward_model().string());
  if (fwd.net.n_in() != sys.n_x || fwd.net.n_out() != obs.n_z) {
    throw ConfigError("forward model dimensions do not match the configured system");
  }
  const DatasetS1 s1 = load_s1(layout);
  const S2Config s2cfg = s2_config(cfg, s1);
  const std::string fwd_sum = fmt::format("{:016x}", fwd.net.checksum());

  DatasetS2 s2;
  bool reuse = false;
  if (fs::exists(layout.data() / "s2.json")) {
    const Json side = read_json(layout.data() / "s2.json");
    reuse = side.value("forward_checksum", std::string{}) == fwd_sum && side.contains("s2") &&
            side.at("s2") == s2_config_json(s2cfg);
  }
  if (reuse) {
    s2 = read_dataset_s2(layout.data());
  } else {
    s2 = generate_s2(fwd.net, sys, s2cfg);
    Json side;
    side["forward_checksum"] = fwd_sum;
    side["s2"] = s2_config_json(s2cfg);
    side["config"] = cfg.to_json();
    write_dataset_s2(layout.data(), s2, side);
  }

  auto [eta, report] = train_inverse(s2, cfg.train_inverse);
  TrainOutcome out{ModelFile{"inverse", std::move(eta), obs, cfg.to_json()}, std::move(report)};
  out.model.config["forward_checksum"] = fwd_sum;
  write_model(layout.inverse_model(), out.model);
  Json rep = report_json(out.report, out.model.net);
  rep["config"] = cfg.to_json();
  write_json(layout.models() / "inverse_report.json", rep);
  return out;
}

void cmd_simulate(const PipelineConfig& cfg, const std::vector<std::string>& scenarios, bool emit_plot_data) {
  const Layout layout{cfg.output_dir};
  const SystemModel sys = config_system(cfg);
  const ObserverMatrices obs = config_observer(cfg);
  const ModelFile fwd = load_model(layout.forward_model(), "forward");
  const ModelFile inv = load_model(layout.inverse_model(), "inverse");
  require_observer(fwd, obs, layout.forward_model().string());
  require_observer(inv, obs, layout.inverse_model().string());

  for (const auto& name : scenarios) {
    const Scenario sc = make_scenario(cfg, name);
    const auto runs = run_scenario(cfg, sys, obs, fwd.net, inv.net, sc);
    const fs::path dir = layout.runs(name);
    fs::create_directories(dir);
    const Mat x0 = sample_box(cfg.eval.n_test, sc.box, sc.x0_seed);
    Json index;
    index["scenario"] = name;
    index["box"] = box_json(sc.box);
    index["w_std"] = sc.noise.w_std;
    index["v_std"] = sc.noise.v_std;
    Json entries = Json::array();
    for (std::size_t i = 0; i < runs.size(); ++i) {
      const std::string file = fmt::format("run_{:03d}.csv", i);
      write_run_csv(dir / file, runs[i]);
      Json e;
      e["file"] = file;
      e["x0"] = vec_json(x0.col(static_cast<Eigen::Index>(i)));
      e["noise_seed"] = derive_seed(sc.noise.seed, i);
      e["w_bar"] = runs[i].w_bar;
      e["v_bar"] = runs[i].v_bar;
      entries.push_back(std::move(e));
    }
    index["runs"] = std::move(entries);
    index["config"] = cfg.to_json();
    write_json(dir / "index.json", index);

    if (emit_plot_data && !runs.empty()) {
      // One file per state component of the first run: time, true, estimate.
      const auto& run = runs.front();
      for (int c = 0; c < sys.n_x; ++c) {
        Mat cols(3, static_cast<Eigen::Index>(run.true_traj.size()));
        for (std::size_t k = 0; k < run.true_traj.size(); ++k) {
          const auto kk = static_cast<Eigen::Index>(k);
          cols(0, kk) = run.true_traj.times[k];
          cols(1, kk) = run.true_traj.states[k][c];
          cols(2, kk) = run.est_traj.states[k][c];
        }
        const Mat t = cols.row(0), x = cols.row(1), xh = cols.row(2);
        write_samples_csv(dir / "plots" / fmt::format("state_x{}.csv", c + 1),
                          {{"t", &t}, {"x", &x}, {"xhat", &xh}});
      }
    }
  }
}

Certificate cmd_bounds(const PipelineConfig& cfg) {
  const Layout layout{cfg.output_dir};
  const SystemModel sys = config_system(cfg);
  const ObserverMatrices obs = config_observer(cfg);
  const ModelFile fwd = load_model(layout.forward_model(), "forward");
  const ModelFile inv = load_model(layout.inverse_model(), "inverse");
  require_observer(fwd, obs, layout.forward_model().string());
  require_observer(inv, obs, layout.inverse_model().string());
  const DatasetS1 s1 = load_s1(layout);
  if (!fs::exists(layout.data() / "s2.json")) throw IoError("no S2 dataset; run train-inverse first");
  const DatasetS2 s2 = read_dataset_s2(layout.data());

  const double nu = cfg.train_forward.nu;
  const RiskS1 r1 = empirical_risk_s1(fwd.net, s1, obs, sys, nu);
  const double r2 = empirical_risk_s2(inv.net, s2);
  const double m_theta = max_sample_loss_s1(fwd.net, s1, obs, sys, nu);
  const double m_eta = max_sample_loss_s2(inv.net, s2);
  const double n1 = static_cast<double>(s1.n_data() + s1.n_pde());
  const double n2 = static_cast<double>(s2.size());
  const double d_theta = cfg.eval.d_theta > 0 ? cfg.eval.d_theta : static_cast<double>(fwd.net.parameter_count());
  const double d_eta = cfg.eval.d_eta > 0 ? cfg.eval.d_eta : static_cast<double>(inv.net.parameter_count());
  const double ell_eta = lipschitz_upper_bound(inv.net);
  const double ell_h =
      estimate_ell_h(sys, cfg.data.x_box, cfg.eval.ell_h_samples, derive_seed(cfg.eval.seed, kStreamEllH));

  double c_theta = -1.0, c_eta = -1.0;
  Json bounds;
  bounds["complexity_theta"] = complexity_or_null(m_theta, d_theta, n1, cfg.eval.delta, &c_theta);
  bounds["complexity_eta"] = complexity_or_null(m_eta, d_eta, n2, cfg.eval.delta, &c_eta);
  const bool have_rt = c_theta >= 0.0 && c_eta >= 0.0;
  const double rt_bound = have_rt ? inverse_error_bound(r2, c_eta, ell_eta, r1.total, c_theta) : 0.0;
  bounds["inverse_error_bound"] = have_rt ? Json(rt_bound) : Json(nullptr);
  bounds["inverse_error_confidence"] = have_rt ? Json(1.0 - 2.0 * cfg.eval.delta) : Json(nullptr);

  const auto clean = load_runs(layout, "clean", sys, obs);
  const auto noisy = load_runs(layout, "noisy", sys, obs);
  const double t_cut = cfg.eval.tail_cutoff;

  bool pass = true;
  Json checks = Json::array();
  checks.push_back(envelope_json("filter_error_envelope_clean", clean.runs, obs, ell_h, &pass));
  checks.push_back(envelope_json("filter_error_envelope_noisy", noisy.runs, obs, ell_h, &pass));

  if (clean.runs.empty()) {
    checks.push_back(check_json("steady_state_noise_free", false, true, 0, 0, "no clean runs on disk"));
  } else if (!have_rt) {
    checks.push_back(check_json("steady_state_noise_free", false, true, 0, 0,
                                "complexity term undefined (N < d), so the learning bound is unavailable"));
  } else {
    const double emp = empirical_steady_state_error(clean.runs, t_cut);
    const double bound = 2.0 * rt_bound;
    pass = pass && emp <= bound;
    checks.push_back(check_json("steady_state_noise_free", true, emp <= bound, emp, bound,
                                "tail mean of ||x - xhat||^2 against 2 x inverse_error_bound"));
  }

  const double wbar = max_over(noisy.runs, &EstimationRun::w_bar);
  const double vbar = max_over(noisy.runs, &EstimationRun::v_bar);
  double ss_bound = 0.0;
  if (noisy.runs.empty()) {
    checks.push_back(check_json("steady_state_noisy", false, true, 0, 0, "no noisy runs on disk"));
  } else {
    ss_bound = steady_state_bound(rt_bound, ell_eta, obs.cond_V, obs.lambda_min, obs.norm_B(), ell_h, wbar,
                                  sys.n_y, vbar);
    const double emp = empirical_steady_state_error(noisy.runs, t_cut);
    pass = pass && emp <= ss_bound;
    checks.push_back(check_json(
        "steady_state_noisy", true, emp <= ss_bound, emp, ss_bound,
        have_rt ? "learning term from inverse_error_bound"
                : "learning term set to 0 because the complexity term is undefined; this only tightens the bound"));
  }
  bounds["steady_state_bound"] = noisy.runs.empty() ? Json(nullptr) : Json(ss_bound);

  Json inputs;
  inputs["n_data"] = s1.n_data();
  inputs["n_pde"] = s1.n_pde();
  inputs["n1"] = n1;
  inputs["n2"] = n2;
  inputs["d_theta"] = d_theta;
  inputs["d_eta"] = d_eta;
  inputs["d_source"] = cfg.eval.d_theta > 0 || cfg.eval.d_eta > 0 ? "config" : "parameter count";
  inputs["delta"] = cfg.eval.delta;
  inputs["nu"] = nu;
  inputs["empirical_risk_s1"] = r1.total;
  inputs["empirical_risk_s1_data"] = r1.data;
  inputs["empirical_risk_s1_pde"] = r1.pde;
  inputs["empirical_risk_s2"] = r2;
  inputs["m_theta"] = m_theta;
  inputs["m_eta"] = m_eta;
  inputs["ell_eta"] = ell_eta;
  inputs["ell_h"] = ell_h;
  inputs["cond_V"] = obs.cond_V;
  inputs["lambda_min"] = obs.lambda_min;
  inputs["norm_B"] = obs.norm_B();
  inputs["n_y"] = sys.n_y;
  inputs["w_bar"] = wbar;
  inputs["v_bar"] = vbar;
  inputs["psi"] = "identity";
  inputs["tail_cutoff"] = t_cut;

  Certificate cert;
  cert.pass = pass;
  cert.json["pass"] = pass;
  cert.json["inputs"] = inputs;
  cert.json["bounds"] = bounds;
  cert.json["checks"] = checks;
  cert.json["assumptions"] = Json::array(
      {"psi is the identity on w_bar", "pseudo-dimensions are the supplied d values",
       "steady-state expectation is the tail time average over the test ensemble"});
  cert.json["config"] = cfg.to_json();
  write_json(layout.root / "certificate.json", cert.json);
  return cert;
}

Evaluation cmd_evaluate(const PipelineConfig& cfg) {
  const Layout layout{cfg.output_dir};
  const SystemModel sys = config_system(cfg);
  const ObserverMatrices obs = config_observer(cfg);
  Evaluation ev;
  Json scen = Json::object();
  for (const auto& name : scenario_names()) {
    const auto loaded = load_runs(layout, name, sys, obs);
    if (loaded.runs.empty()) continue;
    Json s;
    s["runs"] = loaded.runs.size();
    s["full"] = metrics_json(compute_metrics(loaded.runs, cfg.eval.t_cutoff));
    s["tail"] = metrics_json(compute_metrics(loaded.runs, cfg.eval.tail_cutoff));
    double max_abs = 0.0;
    for (const auto& r : loaded.runs) {
      for (const auto& x : r.est_traj.states) max_abs = std::max(max_abs, x.lpNorm<Eigen::Infinity>());
    }
    s["max_abs_estimate"] = max_abs;
    scen[name] = std::move(s);
  }
  if (scen.empty()) throw IoError("no runs found; run simulate first");
  ev.metrics["scenarios"] = std::move(scen);
  ev.metrics["horizon"] = {{"T", cfg.eval.T}, {"dt", cfg.eval.dt}};
  ev.metrics["config"] = cfg.to_json();
  write_json(layout.root / "metrics.json", ev.metrics);
  ev.certificate = cmd_bounds(cfg);
  return ev;
}

Json cmd_ablate(const PipelineConfig& cfg) {
  const Layout layout{cfg.output_dir};
  const SystemModel sys = config_system(cfg);
  const ObserverMatrices obs = config_observer(cfg);
  const DatasetS1 s1 = generate_s1(sys, obs, s1_config(cfg, sys));
  const S2Config s2cfg = s2_config(cfg, s1);
  const std::vector<std::string> boxes{"clean", "ood"};
  const std::vector<double> nus{cfg.train_forward.nu > 0 ? cfg.train_forward.nu : 1.0, 0.0};

  Json per_seed = Json::array();
  // sums[variant][box] = {rmse, smape}
  std::vector<std::vector<std::pair<double, double>>> sums(2, std::vector<std::pair<double, double>>(2, {0, 0}));
  for (const auto seed : cfg.ablation.seeds) {
    Json entry;
    entry["seed"] = seed;
    for (std::size_t v = 0; v < nus.size(); ++v) {
      TrainConfig tf = cfg.train_forward;
      tf.seed = seed;
      tf.nu = nus[v];
      TrainConfig ti = cfg.train_inverse;
      ti.seed = derive_seed(seed, 2);
      const MlpParams theta = train_forward(s1, obs, sys, tf).first;
      const DatasetS2 s2 = generate_s2(theta, sys, s2cfg);
      const MlpParams eta = train_inverse(s2, ti).first;
      Json variant;
      variant["nu"] = nus[v];
      for (std::size_t b = 0; b < boxes.size(); ++b) {
        const auto runs = run_scenario(cfg, sys, obs, theta, eta, make_scenario(cfg, boxes[b]));
        const MetricsReport m = compute_metrics(runs, cfg.eval.t_cutoff);
        sums[v][b].first += m.rmse;
        sums[v][b].second += m.smape;
        variant[boxes[b] == "clean" ? "in_domain" : "out_of_domain"] = {{"rmse", m.rmse},
                                                                         {"smape_percent", m.smape}};
      }
      entry[v == 0 ? "physics" : "no_physics"] = std::move(variant);
    }
    per_seed.push_back(std::move(entry));
  }

  const double n = static_cast<double>(cfg.ablation.seeds.size());
  Json mean;
  for (std::size_t v = 0; v < 2; ++v) {
    Json variant;
    variant["nu"] = nus[v];
    for (std::size_t b = 0; b < boxes.size(); ++b) {
      variant[boxes[b] == "clean" ? "in_domain" : "out_of_domain"] = {{"rmse", sums[v][b].first / n},
                                                                       {"smape_percent", sums[v][b].second / n}};
    }
    mean[v == 0 ? "physics" : "no_physics"] = std::move(variant);
  }
  Json out;
  out["seeds"] = cfg.ablation.seeds;
  out["per_seed"] = std::move(per_seed);
  out["mean"] = mean;
  out["out_of_domain_rmse_physics_not_worse"] = sums[0][1].first <= sums[1][1].first;
  out["out_of_domain_smape_physics_not_worse"] = sums[0][1].second <= sums[1][1].second;
  out["in_domain_box"] = box_json(cfg.eval.test_box);
  out["out_of_domain_box"] = box_json(cfg.eval.ood_box);
  out["n_test"] = cfg.eval.n_test;
  out["config"] = cfg.to_json();
  write_json(layout.root / "ablation.json", out);
  return out;
}

}  // namespace kkl
