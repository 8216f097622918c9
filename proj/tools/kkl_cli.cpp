// Command-line front end for the observer learning pipeline.
#include <chrono>
#include <cstdio>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "kkl/error.hpp"
#include "kkl/parallel.hpp"
#include "kkl/pipeline.hpp"

namespace {

enum ExitCode { kOk = 0, kFailure = 1, kConfig = 2, kDivergence = 3, kBoundCheck = 4 };

struct Common {
  std::string config_file;
  std::string system;
  std::string out;
  std::vector<std::string> sets;
  int threads = 0;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("-c,--config", c.config_file, "JSON config file");
  cmd->add_option("-s,--system", c.system, "duffing | vanderpol | rossler | lorenz");
  cmd->add_option("-o,--out", c.out, "output directory (overrides /output_dir)");
  cmd->add_option("--set", c.sets, "override a config field, e.g. --set /data/p=50")->take_all();
  cmd->add_option("--threads", c.threads, "cap on worker threads (0 = runtime default)")
      ->check(CLI::NonNegativeNumber);
}

kkl::PipelineConfig resolve(const Common& c) {
  kkl::ConfigSources src;
  if (!c.config_file.empty()) src.file = c.config_file;
  if (!c.system.empty()) src.system = c.system;
  if (!c.out.empty()) src.output_dir = c.out;
  src.assignments = c.sets;
  kkl::set_thread_limit(c.threads);
  return kkl::resolve_config(src);
}

void print_train(const char* what, const kkl::TrainOutcome& t, double seconds) {
  const auto& r = t.report;
  fmt::print("{}: {} parameters, {} epochs, best epoch {}, loss {:.6g} -> {:.6g} ({:.1f} s)\n", what,
             t.model.net.parameter_count(), r.total_loss.size(), r.best_epoch, r.initial_total_loss,
             r.best_epoch == 0 ? r.initial_total_loss : r.total_loss[static_cast<std::size_t>(r.best_epoch - 1)],
             seconds);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void print_certificate(const kkl::Certificate& cert) {
  for (const auto& c : cert.json.at("checks")) {
    if (!c.at("applicable").get<bool>()) {
      fmt::print("  {:<30} n/a   {}\n", c.at("name").get<std::string>(), c.at("note").get<std::string>());
      continue;
    }
    const double margin = c.contains("min_margin") ? c.at("min_margin").get<double>() : c.at("margin").get<double>();
    fmt::print("  {:<30} {}  margin {:.4g}\n", c.at("name").get<std::string>(),
               c.at("pass").get<bool>() ? "pass" : "FAIL", margin);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learned KKL observer pipeline"};
  app.require_subcommand(1);

  Common common;
  std::vector<std::string> scenarios;
  bool emit_plot = false;
  bool strict = false;

  auto* gen = app.add_subcommand("generate-data", "simulate plant and filter trajectories into S1");
  auto* fwd = app.add_subcommand("train-forward", "fit the forward map on S1");
  auto* inv = app.add_subcommand("train-inverse", "fit the inverse map on S2 (generated when absent)");
  auto* sim = app.add_subcommand("simulate", "roll out the learned observer on test trajectories");
  auto* eva = app.add_subcommand("evaluate", "metrics and bound certificate for the simulated runs");
  auto* abl = app.add_subcommand("ablate", "physics-informed vs data-only training over several seeds");
  auto* bnd = app.add_subcommand("bounds", "write the bound certificate only");
  auto* cfg_cmd = app.add_subcommand("config", "print the resolved configuration");
  for (auto* cmd : {gen, fwd, inv, sim, eva, abl, bnd, cfg_cmd}) add_common(cmd, common);
  sim->add_option("--scenario", scenarios, "clean | noisy | ood (default: all)")
      ->check(CLI::IsMember(kkl::scenario_names()));
  sim->add_flag("--emit-plot-data", emit_plot, "per-state true/estimate CSVs for the first run");
  eva->add_flag("--strict", strict, "exit 4 when any bound check fails");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  try {
    const kkl::PipelineConfig cfg = resolve(common);
    const auto t0 = std::chrono::steady_clock::now();
    if (gen->parsed()) {
      const auto s1 = kkl::cmd_generate_data(cfg);
      fmt::print("S1: {} labeled pairs (p = {}, tau = {}, k* = {}, t*max = {:.3f}), {} collocation points -> {}\n",
                 s1.n_data(), s1.p, s1.tau, s1.k_star, s1.t_star_max, s1.n_pde(),
                 kkl::Layout{cfg.output_dir}.data().string());
    } else if (fwd->parsed()) {
      const auto out = kkl::cmd_train_forward(cfg);
      print_train("forward", out, seconds_since(t0));
    } else if (inv->parsed()) {
      const auto out = kkl::cmd_train_inverse(cfg);
      print_train("inverse", out, seconds_since(t0));
    } else if (sim->parsed()) {
      kkl::cmd_simulate(cfg, scenarios.empty() ? kkl::scenario_names() : scenarios, emit_plot);
      fmt::print("simulated {} run(s) per scenario -> {}\n", cfg.eval.n_test, (cfg.output_dir / "runs").string());
    } else if (eva->parsed()) {
      const auto ev = kkl::cmd_evaluate(cfg);
      for (const auto& [name, s] : ev.metrics.at("scenarios").items()) {
        fmt::print("  {:<6} rmse {:.4g}  smape {:.3g}%  tail rmse {:.4g}\n", name,
                   s.at("full").at("rmse").get<double>(), s.at("full").at("smape_percent").get<double>(),
                   s.at("tail").at("rmse").get<double>());
      }
      print_certificate(ev.certificate);
      if (strict && !ev.certificate.pass) {
        fmt::print(stderr, "bound check failed\n");
        return kBoundCheck;
      }
    } else if (bnd->parsed()) {
      const auto cert = kkl::cmd_bounds(cfg);
      print_certificate(cert);
    } else if (abl->parsed()) {
      const auto rep = kkl::cmd_ablate(cfg);
      for (const char* v : {"physics", "no_physics"}) {
        const auto& m = rep.at("mean").at(v);
        fmt::print("  {:<10} in-domain rmse {:.4g} smape {:.3g}%   out-of-domain rmse {:.4g} smape {:.3g}%\n", v,
                   m.at("in_domain").at("rmse").get<double>(), m.at("in_domain").at("smape_percent").get<double>(),
                   m.at("out_of_domain").at("rmse").get<double>(),
                   m.at("out_of_domain").at("smape_percent").get<double>());
      }
    } else if (cfg_cmd->parsed()) {
      fmt::print("{}\n", cfg.to_json().dump(2));
    }
    return kOk;
  } catch (const kkl::ConfigError& e) {
    fmt::print(stderr, "config error: {}\n", e.what());
    return kConfig;
  } catch (const kkl::DivergenceError& e) {
    fmt::print(stderr, "numeric divergence: {}\n", e.what());
    return kDivergence;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return kFailure;
  }
}
