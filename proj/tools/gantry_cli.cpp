// gantry_cli: closed-loop runs, reference optimization and sampling-time sweeps
// from a scenario config.
//
//   gantry_cli run      --config configs/benchmark_10ms.cfg --out out
//   gantry_cli optimize --config configs/optimal_3s.cfg
//   gantry_cli sweep    --config configs/benchmark_10ms.cfg --ts 10,40,80,100

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gantry/scenario.hpp"

namespace fs = std::filesystem;
using namespace gantry;

namespace {

// exit codes
constexpr int kOk = 0;
constexpr int kDiverged = 1;
constexpr int kInvalid = 2;
constexpr int kOptimizerFailed = 3;

struct Options {
  std::string config;
  std::string out;
  std::string ts;
  std::uint64_t seed = 0;
};

fs::path output_dir(const ScenarioConfig& cfg, const Options& o) {
  fs::path dir = o.out.empty() ? fs::path(cfg.output_directory) : fs::path(o.out);
  fs::create_directories(dir);
  return dir;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream f(p);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  return f;
}

nlohmann::ordered_json summary_json(const ScenarioResult& r) {
  const auto& s = r.summary;
  nlohmann::ordered_json j;
  j["controller"] = to_string(r.controller);
  j["sample_time"] = r.sample_time;
  j["diverged"] = r.diverged;
  j["last_valid_index"] = r.last_valid_index;
  if (r.diverged) j["divergence_reason"] = r.divergence_reason;
  j["max_error"] = {s.max_error(0), s.max_error(1)};
  j["final_error"] = {s.final_error(0), s.final_error(1)};
  j["max_position_error"] = s.max_position_error;
  j["final_position_error"] = s.final_position_error;
  j["F_range"] = {s.F_min, s.F_max};
  j["M_range"] = {s.M_min, s.M_max};
  return j;
}

void print_table(const std::vector<ScenarioResult>& results) {
  std::printf("%-13s %7s %9s %12s %12s %10s %10s\n", "controller", "Ts[ms]", "status",
              "max_err[mm]", "final[mm]", "max|F|[N]", "max|M|[Nm]");
  for (const auto& r : results) {
    const auto& s = r.summary;
    std::printf("%-13s %7.1f %9s %12.4f %12.4f %10.4f %10.4f\n", to_string(r.controller).c_str(),
                r.sample_time * 1e3, r.diverged ? "DIVERGED" : "ok", s.max_position_error * 1e3,
                s.final_position_error * 1e3, std::max(std::abs(s.F_min), std::abs(s.F_max)),
                std::max(std::abs(s.M_min), std::abs(s.M_max)));
  }
}

// Max-error ratios against the first controller of the list.
void print_comparison(const std::vector<ScenarioResult>& results) {
  if (results.size() < 2) return;
  const auto& base = results.front();
  std::printf("\ncomparison against %s\n", to_string(base.controller).c_str());
  for (std::size_t i = 1; i < results.size(); ++i) {
    const auto& r = results[i];
    if (r.diverged) {
      std::printf("  %-13s diverged at k=%d (%s)\n", to_string(r.controller).c_str(),
                  r.last_valid_index, r.divergence_reason.c_str());
      continue;
    }
    const double ratio = r.summary.max_position_error / std::max(base.summary.max_position_error, 1e-15);
    std::printf("  %-13s max error ratio %.3g\n", to_string(r.controller).c_str(), ratio);
  }
}

int run_all(const ScenarioConfig& cfg, const Options& o,
            const std::optional<ReferenceTrajectory>& fixed) {
  const fs::path dir = output_dir(cfg, o);
  std::optional<ReferenceTrajectory> ref = fixed;
  if (!ref) ref = build_reference(cfg, cfg.simulation.sample_time);

  std::vector<ScenarioResult> results;
  for (ControllerKind kind : cfg.controller.kinds) {
    Scenario sc = build_scenario(cfg, kind, o.seed, ref);
    ScenarioResult r = run_scenario(sc);
    auto csv = open_out(dir / result_file_name(cfg.name, kind, sc.sample_time));
    write_result_csv(csv, r);
    results.push_back(std::move(r));
  }

  nlohmann::ordered_json j;
  j["scenario"] = cfg.name;
  j["seed"] = o.seed;
  j["config"] = to_config_text(cfg);
  j["runs"] = nlohmann::ordered_json::array();
  for (const auto& r : results) j["runs"].push_back(summary_json(r));
  open_out(dir / (cfg.name + "_summary.json")) << j.dump(2) << "\n";

  print_table(results);
  print_comparison(results);
  bool diverged = false;
  for (const auto& r : results) diverged = diverged || r.diverged;
  return diverged ? kDiverged : kOk;
}

int cmd_run(const Options& o) {
  const ScenarioConfig cfg = load_scenario_config(o.config);
  return run_all(cfg, o, std::nullopt);
}

void write_optimization(const fs::path& dir, const std::string& name, const OptimizationResult& r,
                        const std::string& tag) {
  auto csv = open_out(dir / (name + "_" + tag + ".csv"));
  write_reference_csv(csv, r.trajectory);
  auto js = open_out(dir / (name + "_" + tag + "_report.json"));
  write_report_json(js, r.report);
}

int cmd_optimize(const Options& o) {
  ScenarioConfig cfg = load_scenario_config(o.config);
  const fs::path dir = output_dir(cfg, o);
  const OptimizationProblem problem = optimization_problem(cfg);
  problem.validate();
  const ReferenceTrajectory init = initial_reference(problem);
  OptimizationResult result;
  try {
    result = optimize_minimax_acceleration(problem, init, cfg.crane);
  } catch (const OptimizationError& e) {
    write_optimization(dir, cfg.name, e.best(), "best_iterate");
    const auto& rep = e.best().report;
    std::fprintf(stderr, "optimization failed: %s\n", e.what());
    std::fprintf(stderr, "best iterate: eps=%.6g m/s^2, max violation %.6g, %d outer / %d inner iterations\n",
                 rep.epsilon, rep.max_violation, rep.outer_iterations, rep.inner_iterations);
    std::fprintf(stderr, "written to %s\n", (dir / (cfg.name + "_best_iterate_report.json")).c_str());
    return kOptimizerFailed;
  }
  write_optimization(dir, cfg.name, result, "optimal");
  const auto& rep = result.report;
  std::printf("eps* = %.6f m/s^2 (initializer %.6f), %d barrier stages, %d Newton steps\n",
              rep.epsilon, rep.initial_epsilon, rep.outer_iterations, rep.inner_iterations);
  double Fm = 0.0, Mm = 0.0;
  for (double f : rep.F) Fm = std::max(Fm, std::abs(f));
  for (double m : rep.M) Mm = std::max(Mm, std::abs(m));
  std::printf("max|F| = %.4f N (bound %.4g), max|M| = %.4f N m (bound %.4g)\n", Fm, rep.F_max, Mm,
              rep.M_max);
  if (!cfg.optimization.run_after) return kOk;

  std::vector<ControllerKind> kinds;
  for (ControllerKind k : cfg.controller.kinds) {
    if (k != ControllerKind::EmulatedContinuous) kinds.push_back(k);
  }
  cfg.controller.kinds = kinds;
  if (kinds.empty()) return kOk;
  std::printf("\n");
  return run_all(cfg, o, result.trajectory);
}

int cmd_sweep(const Options& o) {
  ScenarioConfig cfg = load_scenario_config(o.config);
  std::vector<double> ts;
  if (o.ts.empty()) {
    ts.push_back(cfg.simulation.sample_time);
  } else {
    for (double ms : parse_double_list(o.ts, "--ts")) {
      if (!(ms > 0.0)) throw ValidationError("--ts values must be positive");
      ts.push_back(ms * 1e-3);
    }
  }
  if (ts.size() == 1) {
    cfg.simulation.sample_time = ts.front();
    cfg.reference.allow_off_grid = cfg.reference.kind == ReferenceKind::Polynomial;
    cfg.validate();
    return run_all(cfg, o, std::nullopt);
  }
  const fs::path dir = output_dir(cfg, o);
  const Scenario sc = build_scenario(cfg, cfg.controller.kinds.front(), o.seed);
  const auto rows = sweep_sampling_times(sc, ts, cfg.controller.kinds);
  auto csv = open_out(dir / (cfg.name + "_sweep.csv"));
  write_sweep_csv(csv, rows);

  std::printf("%-13s %7s %9s %12s %12s\n", "controller", "Ts[ms]", "status", "max_err[mm]",
              "final[mm]");
  for (const auto& r : rows) {
    std::printf("%-13s %7.1f %9s %12.4f %12.4f\n", to_string(r.controller).c_str(),
                r.sample_time * 1e3, r.diverged ? "DIVERGED" : "ok",
                r.summary.max_position_error * 1e3, r.summary.final_position_error * 1e3);
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Flatness-based gantry crane control: simulation and reference optimization"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);
  Options o;

  auto add_common = [&o](CLI::App* sub) {
    sub->add_option("--config", o.config, "scenario config file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", o.out, "output directory (default: [output] directory)");
    sub->add_option("--seed", o.seed, "seed for the initial perturbation");
  };
  auto* run = app.add_subcommand("run", "closed-loop run of every configured controller");
  add_common(run);
  auto* opt = app.add_subcommand("optimize", "minimax-acceleration reference optimization");
  add_common(opt);
  auto* sweep = app.add_subcommand("sweep", "sampling-time sweep");
  add_common(sweep);
  sweep->add_option("--ts", o.ts, "comma separated sampling times in ms");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(o);
    if (opt->parsed()) return cmd_optimize(o);
    return cmd_sweep(o);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "%s: %s\n", o.config.c_str(), e.what());
    return kInvalid;
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "invalid scenario: %s\n", e.what());
    return kInvalid;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kInvalid;
  }
}
