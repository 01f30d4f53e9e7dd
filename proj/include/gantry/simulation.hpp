#pragma once

// Sampled-data closed loop: continuous crane plant (RK4 under zero-order hold)
// driven by one of the discrete controllers or by an emulated continuous law.

#include <array>
#include <complex>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "gantry/controllers.hpp"
#include "gantry/trajectory.hpp"

namespace gantry {

enum class ControllerKind { DiscreteDynamic, DiscreteQuasiStatic, EmulatedContinuous };

std::string to_string(ControllerKind kind);
/// Accepts "dynamic", "quasi_static", "continuous".
ControllerKind parse_controller_kind(const std::string& name);

struct Disturbance {
  double F = 0.0;  // [N]
  double M = 0.0;  // [N m]
};

struct PlantModel {
  CraneParams params;
  bool friction_enabled = false;
  double friction_velocity_eps = 1e-3;  // tanh smoothing of Coulomb friction [m/s]
  Disturbance disturbance;
  int substeps = 20;                    // RK4 steps per sampling interval
  bool nominal_euler = false;           // replace the plant by euler_step (testing)

  void validate() const;
  /// 20 substeps at 10 ms, proportional in T_s.
  static int default_substeps(double sample_time);
};

/// Plant vector field in trolley coordinates including friction and disturbance.
Vector6<double> plant_dynamics(const PlantModel& plant, const OriginalState<double>& x,
                               const Input<double>& u);

/// One sampling interval with the input held: `substeps` classical RK4 steps.
OriginalState<double> integrate_interval(const PlantModel& plant, const OriginalState<double>& x,
                                         const Input<double>& u, double sample_time);

/// Continuous error dynamics e^(n) + c_{n-1} e^(n-1) + ... + c_0 e = 0 per channel, orders (4, 2).
struct ContinuousErrorDynamics {
  std::array<std::vector<double>, 2> coefficients;
};

/// Hurwitz polynomial coefficients from left-half-plane roots (conjugate pairs required).
std::vector<double> hurwitz_coefficients(std::span<const std::complex<double>> roots);
/// Every channel gets `order` copies of the real root s < 0.
ContinuousErrorDynamics continuous_uniform(double s, std::array<int, 2> orders = {4, 2});

/// Continuous-time quasi-static linearizing law (x_L chain of order 4, y_L chain of
/// order 2), given the reference derivatives 0..4 at the current time.
Input<double> emulated_continuous_controller(const TransformedState<double>& x,
                                             const ReferenceDerivatives& ref,
                                             const ContinuousErrorDynamics& spec,
                                             const CraneParams& params);

struct ClosedLoopOptions {
  ControllerKind controller = ControllerKind::DiscreteQuasiStatic;
  ErrorDynamicsSpec spec = uniform_spec(0.5, {4, 2});
  ContinuousErrorDynamics continuous = continuous_uniform(-20.0);
  /// Error dynamics with integral parts, used from the activation time on. Before
  /// that `spec` applies.
  std::optional<ErrorDynamicsSpec> integral_spec;
  /// Integral parts start accumulating at this time; default: end of the transition.
  std::optional<double> integral_activation_time;
  bool friction_feedforward = false;
  FrictionCompensation compensation;
  /// Total simulated time; default: reference length plus one second.
  std::optional<double> duration;
  /// Offset of the initial load position from the reference rest point [m].
  Eigen::Vector2d initial_offset = Eigen::Vector2d::Zero();
};

struct ScenarioSummary {
  Eigen::Vector2d max_error = Eigen::Vector2d::Zero();    // per channel, absolute [m]
  Eigen::Vector2d final_error = Eigen::Vector2d::Zero();  // per channel, absolute [m]
  double max_position_error = 0.0;                        // max Euclidean load error [m]
  double final_position_error = 0.0;
  double F_min = 0.0, F_max = 0.0, M_min = 0.0, M_max = 0.0;
};

struct ScenarioResult {
  double sample_time = 0.0;
  ControllerKind controller = ControllerKind::DiscreteQuasiStatic;
  std::vector<double> time;
  std::vector<OriginalState<double>> original;
  std::vector<TransformedState<double>> transformed;
  std::vector<Input<double>> input;           // applied over [t_k, t_k+1)
  std::vector<Eigen::Vector2d> reference;     // y_d(k)
  std::vector<Eigen::Vector2d> error;         // y(k) - y_d(k)
  bool diverged = false;
  int last_valid_index = -1;
  std::string divergence_reason;
  ScenarioSummary summary;

  int size() const { return static_cast<int>(time.size()); }
};

/// Runs the closed loop from the reference's initial rest state. Divergence ends the
/// run and is recorded, not thrown.
ScenarioResult run_closed_loop(const PlantModel& plant, const ClosedLoopOptions& options,
                               const ReferenceTrajectory& ref);

ScenarioSummary summarize(const ScenarioResult& result);

/// k,t, both states, F,M, reference and errors; one row per sampling instant.
void write_result_csv(std::ostream& out, const ScenarioResult& result);
/// `<scenario>_<controller>_<Ts_ms>ms.csv`
std::string result_file_name(const std::string& scenario, ControllerKind controller,
                             double sample_time);

/// Everything needed to rebuild a run at another sampling time.
struct Scenario {
  std::string name = "scenario";
  PlantModel plant;
  ClosedLoopOptions options;
  double sample_time = 0.01;
  /// Reference generator for a given T_s.
  std::function<ReferenceTrajectory(double)> reference;
  /// Optional: re-derives controller settings after a sweep changed the controller or T_s.
  std::function<void(Scenario&)> retarget;
};

ScenarioResult run_scenario(const Scenario& scenario);

struct SweepRow {
  ControllerKind controller;
  double sample_time;
  bool diverged;
  int last_valid_index;
  ScenarioSummary summary;
};

/// One row per (controller, T_s), ordered by controller then T_s. Runs are independent
/// and execute concurrently; RK4 substeps scale with T_s relative to the scenario's.
std::vector<SweepRow> sweep_sampling_times(const Scenario& scenario,
                                           const std::vector<double>& sample_times,
                                           const std::vector<ControllerKind>& controllers);

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);

}  // namespace gantry
