// Acceptance checks, one PASS/FAIL line per criterion. Exit status is the number of
// failed criteria.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <string>

#include "gantry/crane_model.hpp"
#include "gantry/scenario.hpp"
#include "test_support.hpp"

using namespace gantry;
namespace fs = std::filesystem;

namespace {

const fs::path kConfigs = GANTRY_CONFIG_DIR;
const fs::path kData = GANTRY_TEST_DATA_DIR;

struct Outcome {
  bool pass = true;
  std::string detail;
};

using Clock = std::chrono::steady_clock;
double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

ScenarioConfig config(const char* name) { return load_scenario_config((kConfigs / name).string()); }

ScenarioResult run(const ScenarioConfig& c, ControllerKind kind) {
  return run_scenario(build_scenario(c, kind, 0));
}

// 1
Outcome round_trip() {
  const CraneParams P;
  const double Ts = 0.02;
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2024);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const auto roll = test::random_rollout(rng, P, Ts);
    const auto fp = flat_parameterize(roll.window, P, Ts);
    worst = std::max({worst, (fp.state.vector() - roll.x0.vector()).cwiseAbs().maxCoeff(),
                      (fp.input.vector() - roll.u0.vector()).cwiseAbs().maxCoeff()});
  }
  const double secs = since(t0);
  return {worst < 1e-9 && secs < 10.0,
          fmt("1000 rollouts at T_s = %g s, max error %.2e, %.3f s", Ts, worst, secs)};
}

// 2
Outcome euler_commutation() {
  const CraneParams P;
  std::mt19937_64 rng(7);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    auto s = test::random_transformed(rng, P);
    if (std::abs(s.theta) < 1e-3) s.theta = 0.05;
    const auto u = test::random_input(rng, P);
    const auto a = euler_step(s, u, P, 0.01);
    const auto b = triangular_euler_step(s, to_triangular_input(s, u, P), P, 0.01);
    worst = std::max(worst, (a.vector() - b.vector()).cwiseAbs().maxCoeff());
  }
  return {worst < 1e-12, fmt("1000 points, max difference %.2e", worst)};
}

struct NominalLog {
  std::vector<Eigen::Vector2d> e, y;
  std::vector<Eigen::Vector2d> v;
};

NominalLog nominal_loop(bool dynamic, const ErrorDynamicsSpec& spec, int steps, double offset = 1e-4) {
  const CraneParams P;
  const double Ts = 0.01;
  const auto ref = polynomial_reference({0.2, 0.7}, {1.0, 0.5}, 1.7, Ts);
  TransformedState<> x = flat_parameterize(ref.window(0), P, Ts).state;
  x.x_L += 3.0 * offset;
  x.y_L -= 2.0 * offset;
  DynamicControllerState z = DynamicControllerState::from_reference(ref.window(0));
  NominalLog log;
  for (int k = 0; k < steps; ++k) {
    Input<> u;
    if (dynamic) {
      const auto out = dynamic_feedback_step(x, z, ref.window(k), spec, P, Ts);
      u = out.input;
      z = out.next;
      log.v.push_back(out.v);
    } else {
      const auto out = quasi_static_feedback(x, ref.window(k), spec, P, Ts);
      u = out.input;
      log.v.push_back({out.v_x, out.v_y(0)});
    }
    log.y.push_back(x.flat_output());
    log.e.push_back(x.flat_output() - ref.at(k));
    x = euler_step(x, u, P, Ts);
  }
  return log;
}

// 3
Outcome exact_linearization() {
  double lin = 0.0;
  for (bool dynamic : {true, false}) {
    const auto log = nominal_loop(dynamic, uniform_spec(0.5, dynamic ? std::array{4, 4} : std::array{4, 2}), 200);
    for (int k = 0; k + 4 < 200; ++k) {
      lin = std::max(lin, std::abs(log.y[k + 4](0) - log.v[k](0)));
      const int ny = dynamic ? 4 : 2;
      if (k + ny < 200) lin = std::max(lin, std::abs(log.y[k + ny](1) - log.v[k](1)));
    }
  }
  // Deadbeat: zero from step 4 (resp. 4/2) on.
  bool exact = true;
  double residual = 0.0;
  for (bool dynamic : {true, false}) {
    const auto log = nominal_loop(dynamic, uniform_spec(0.0, dynamic ? std::array{4, 4} : std::array{4, 2}), 200);
    const int ny = dynamic ? 4 : 2;
    for (int k = 0; k < 200; ++k) {
      if (k >= 4) residual = std::max(residual, std::abs(log.e[k](0)));
      if (k >= ny) residual = std::max(residual, std::abs(log.e[k](1)));
    }
    // y has relative degree 2 in the plant; the dynamic extension starts on the reference.
    exact = exact && std::abs(log.e[3](0)) > 1e-7 && std::abs(log.e[1](1)) > 1e-7;
  }
  return {lin < 1e-9 && residual < 1e-9 && exact,
          fmt("200-step runs, |y[r] - v| <= %.2e; deadbeat residual %.2e from step r, x error still open at step 3 and y at step 1: %s", lin,
              residual, exact ? "yes" : "no")};
}

// 4
Outcome error_recursion() {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(-0.9, 0.9);
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    for (bool dynamic : {true, false}) {
      const auto pair = std::polar(0.2 + 0.6 * std::abs(u(rng)), 0.2 + 2.5 * std::abs(u(rng)));
      std::array<std::vector<std::complex<double>>, 2> roots;
      roots[0] = {pair, std::conj(pair), u(rng), u(rng)};
      roots[1] = dynamic ? std::vector<std::complex<double>>{u(rng), u(rng), std::conj(pair), pair}
                         : std::vector<std::complex<double>>{u(rng), u(rng)};
      const auto spec = pole_place(roots);
      const auto log = nominal_loop(dynamic, spec, 200, 1e-5);
      for (int c = 0; c < 2; ++c) {
        const auto& a = spec.channels[c].coefficients;
        const int n = static_cast<int>(a.size());
        for (int k = 0; k + n < 200; ++k) {
          double r = log.e[k + n](c);
          for (int i = 0; i < n; ++i) r += a[i] * log.e[k + i](c);
          worst = std::max(worst, std::abs(r));
        }
      }
    }
  }
  return {worst < 1e-9, fmt("20 random stable pole sets, max residual %.2e", worst)};
}

// 5
Outcome benchmark() {
  const auto t0 = Clock::now();
  const auto r = run(config("benchmark_10ms.cfg"), ControllerKind::DiscreteQuasiStatic);
  const double secs = since(t0);
  const auto& s = r.summary;
  return {!r.diverged && s.max_position_error < 5e-3 && s.final_position_error < 1e-3 && secs < 5.0,
          fmt("max error %.3f mm, final %.4f mm, %.3f s", s.max_position_error * 1e3,
              s.final_position_error * 1e3, secs)};
}

// 6
Outcome sampling_robustness() {
  const auto c = config("compare_80ms.cfg");
  const auto d = run(c, ControllerKind::DiscreteQuasiStatic);
  const auto e = run(c, ControllerKind::EmulatedContinuous);
  const bool degraded = e.diverged || e.summary.max_position_error >= 3.0 * d.summary.max_position_error;
  std::string detail = fmt("80 ms: discrete final %.2f mm; continuous %s", d.summary.final_position_error * 1e3,
                           e.diverged ? "diverged" : fmt("max %.1f mm", e.summary.max_position_error * 1e3).c_str());
  auto bench = config("benchmark_10ms.cfg");
  const auto rows = sweep_sampling_times(build_scenario(bench, ControllerKind::DiscreteQuasiStatic, 0),
                                         {0.01, 0.04, 0.08, 0.1}, {ControllerKind::DiscreteQuasiStatic});
  bool all = true;
  detail += "; sweep max error [mm]:";
  for (const auto& row : rows) {
    all = all && !row.diverged;
    detail += fmt(" %g ms %s", row.sample_time * 1e3,
                  row.diverged ? "DIVERGED" : fmt("%.2f", row.summary.max_position_error * 1e3).c_str());
  }
  return {!d.diverged && d.summary.final_position_error < 0.02 && degraded && all, detail};
}

// 7
Outcome optimization() {
  const auto c = config("optimal_3s.cfg");
  const auto problem = optimization_problem(c);
  const auto t0 = Clock::now();
  const auto init = initial_reference(problem);
  const double init_eps = evaluate_reference(problem, init, c.crane).epsilon;
  OptimizationResult r;
  try {
    r = optimize_minimax_acceleration(problem, init, c.crane);
  } catch (const std::exception& e) {
    return {false, std::string("optimizer failed: ") + e.what()};
  }
  const double secs = since(t0);
  const auto& rep = r.report;
  const int N = problem.transition_end();
  // Transition samples k = 3 .. N-1 (k < 3 sits at rest before the start).
  int plateau = 0;
  for (int k = 3; k < N; ++k) plateau += std::abs(rep.a_L[k] - rep.epsilon) <= 0.05 * rep.epsilon;
  const double share = double(plateau) / (N - 3);
  bool seg[3] = {false, false, false};
  double Mmax = 0.0;
  for (int k = 0; k < N; ++k) {
    if (std::abs(rep.F[k]) >= problem.F_max * (1.0 - 1e-3)) seg[std::min(2, 3 * k / N)] = true;
    Mmax = std::max(Mmax, std::abs(rep.M[k]));
  }
  const bool pass = rep.converged && rep.epsilon <= init_eps && share >= 0.7 && seg[0] && seg[1] &&
                    seg[2] && Mmax < problem.M_max && secs < 600.0;
  return {pass, fmt("eps* %.4f <= %.4f, plateau %.1f%%, |F| at bound early/mid/late %d/%d/%d, max|M| %.4f, %.1f s",
                    rep.epsilon, init_eps, 100.0 * share, seg[0], seg[1], seg[2], Mmax, secs)};
}

// 8
Outcome integral_rejection() {
  auto c = load_scenario_config((kData / "disturbance.cfg").string());
  const auto with = run(c, ControllerKind::DiscreteQuasiStatic);
  c.controller.integral = false;
  const auto without = run(c, ControllerKind::DiscreteQuasiStatic);
  const bool ok_with = !with.diverged && with.summary.final_position_error < 1e-3;
  const bool ok_without = !without.diverged && without.summary.final_position_error > 2e-3;
  return {ok_with && ok_without,
          fmt("final error with integral %.4f mm (< 1 mm), without %.4f mm (> 2 mm required)",
              with.summary.final_position_error * 1e3, without.summary.final_position_error * 1e3)};
}

// 9
Outcome lying_eight() {
  const auto c = config("lying_eight.cfg");
  const auto ref = build_reference(c, c.simulation.sample_time);
  const bool closed = ref.at(0) == ref.at(ref.transition_end) && ref.at(0) == ref.at(ref.size() - 1);
  const auto r = run(c, ControllerKind::DiscreteQuasiStatic);
  return {!r.diverged && r.summary.max_position_error < 0.02 && closed,
          fmt("max error %.3f mm, path closed exactly: %s", r.summary.max_position_error * 1e3,
              closed ? "yes" : "no")};
}

// 10
Outcome integrator() {
  const CraneParams P;
  const PlantModel plant;
  OriginalState<> s{0.3, 0.6 / P.R, 0.25, 0.1, 0.0, -0.4};
  const double e0 = mechanical_energy(s, P);
  double drift = 0.0;
  for (int k = 0; k < 1000; ++k) {
    s = integrate_interval(plant, s, Input<>{0.0, 0.0}, 0.01);
    drift = std::max(drift, std::abs(mechanical_energy(s, P) - e0) / std::abs(e0));
  }
  auto c = config("benchmark_10ms.cfg");
  const auto a = run(c, ControllerKind::DiscreteQuasiStatic);
  c.simulation.substeps = 2 * PlantModel::default_substeps(c.simulation.sample_time);
  const auto b = run(c, ControllerKind::DiscreteQuasiStatic);
  double diff = 0.0;
  for (int k = 0; k < std::min(a.size(), b.size()); ++k) {
    diff = std::max(diff, (a.original[k].vector() - b.original[k].vector()).cwiseAbs().maxCoeff());
  }
  return {drift < 1e-6 && diff < 1e-8 && a.size() == b.size(),
          fmt("energy drift %.2e over 10 s, substep halving changes states by %.2e", drift, diff)};
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
      {"flatness round trip", round_trip},
      {"Euler discretization commutes with the input transformation", euler_commutation},
      {"exact linearization and deadbeat", exact_linearization},
      {"error recursion for stable pole sets", error_recursion},
      {"benchmark transition at 10 ms", benchmark},
      {"sampling robustness", sampling_robustness},
      {"minimax acceleration optimization", optimization},
      {"integral disturbance rejection", integral_rejection},
      {"lying eight", lying_eight},
      {"plant integrator", integrator},
  };
  int failed = 0, i = 0;
  for (const auto& [name, check] : criteria) {
    ++i;
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("criterion %2d %s  %s: %s\n", i, o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed;
}
