#pragma once

// Scenario configuration files and their translation into runs, optimizations and sweeps.
//
//   [crane]        CraneParams fields
//   [controller]   type, roots, integral, friction feedforward
//   [reference]    polynomial | optimal | lying_eight | file
//   [optimization] bounds and solver settings
//   [simulation]   sampling time, duration, plant options
//   [output]       directory

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gantry/config.hpp"
#include "gantry/optimizer.hpp"
#include "gantry/simulation.hpp"

namespace gantry {

enum class ReferenceKind { Polynomial, Optimal, LyingEight, File };

std::string to_string(ReferenceKind kind);

struct ReferenceConfig {
  ReferenceKind kind = ReferenceKind::Polynomial;
  Eigen::Vector2d start{0.2, 0.7};
  Eigen::Vector2d end{1.0, 0.5};
  double horizon = 1.7;
  /// Accept horizons that are not a multiple of T_s (the transition is then rounded up).
  bool allow_off_grid = false;
  LyingEightGeometry eight;
  std::string file;  // resolved against the config's directory
};

struct ControllerConfig {
  std::vector<ControllerKind> kinds{ControllerKind::DiscreteQuasiStatic};
  std::vector<double> roots_x{0.5};  // one value repeats to the channel order
  std::vector<double> roots_y{0.5};
  double continuous_root = -20.0;    // s-plane, all channels
  bool integral = false;
  double integral_root = 0.7;        // repeated for the extended dynamics
  std::optional<double> integral_activation;
  bool friction_feedforward = false;
  FrictionCompensation compensation;
  bool compensation_set = false;     // otherwise taken from [crane]
};

struct SimulationConfig {
  double sample_time = 0.01;
  std::optional<double> duration;
  std::optional<int> substeps;       // default: PlantModel::default_substeps
  bool friction = false;
  double friction_velocity_eps = 1e-3;
  Disturbance disturbance;
  Eigen::Vector2d initial_offset = Eigen::Vector2d::Zero();
  double initial_perturbation = 0.0;  // uniform +- amplitude on the offset, drawn with --seed
  bool nominal = false;
};

struct OptimizationConfig {
  double F_max = 10.0;
  double M_max = 0.2;
  OptimizerSettings settings;
  bool run_after = false;            // chain the optimal reference into a closed-loop run
};

struct ScenarioConfig {
  std::string name = "scenario";
  std::string base_directory = ".";
  CraneParams crane;
  ControllerConfig controller;
  ReferenceConfig reference;
  SimulationConfig simulation;
  OptimizationConfig optimization;
  std::string output_directory = "out";

  /// Cross-checks of the sections; throws ValidationError.
  void validate() const;
};

/// Parses and validates; unknown sections/keys and bad values raise ConfigError with the line.
ScenarioConfig parse_scenario_config(const ConfigFile& file, const std::string& base_directory = ".");
ScenarioConfig load_scenario_config(const std::string& path);

/// Every effective setting, defaults included, in config syntax.
std::string to_config_text(const ScenarioConfig& config);

/// Discrete error dynamics for a controller kind (orders (4,4) or (4,2)).
ErrorDynamicsSpec discrete_spec(const ControllerConfig& c, ControllerKind kind);
std::optional<ErrorDynamicsSpec> integral_spec(const ControllerConfig& c, ControllerKind kind,
                                               double sample_time);

OptimizationProblem optimization_problem(const ScenarioConfig& config);

/// Reference for sample time T_s. `optimal` is used for ReferenceKind::Optimal.
ReferenceTrajectory build_reference(const ScenarioConfig& config, double sample_time,
                                    const ReferenceTrajectory* optimal = nullptr);

/// Scenario for one controller; `seed` drives the optional initial perturbation.
Scenario build_scenario(const ScenarioConfig& config, ControllerKind kind, std::uint64_t seed,
                        std::optional<ReferenceTrajectory> fixed_reference = std::nullopt);

}  // namespace gantry
