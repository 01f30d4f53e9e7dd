#pragma once

// Minimax load-acceleration reference optimization over the free reference samples.

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "gantry/trajectory.hpp"

namespace gantry {

struct OptimizerSettings {
  double tolerance = 1e-6;        // barrier duality gap in eps [m/s^2]
  int max_outer_iterations = 30;  // barrier stages
  int max_inner_iterations = 200; // Newton steps per stage
};

struct OptimizationProblem {
  Eigen::Vector2d start{0.2, 0.7};
  Eigen::Vector2d end{1.0, 0.5};
  double horizon = 3.0;       // T [s]
  double sample_time = 0.01;  // T_s [s]
  double F_max = 10.0;        // [N]
  double M_max = 0.2;         // [N m]
  OptimizerSettings settings;

  /// Throws ValidationError unless T = n T_s for an integer n and both bounds are positive.
  void validate() const;
  /// Index N of the first terminal rest sample (N = 3 + T / T_s).
  int transition_end() const;
};

struct OptimizationReport {
  double epsilon = 0.0;           // eps* [m/s^2]
  double initial_epsilon = 0.0;   // max a_L of the initializer
  int outer_iterations = 0;
  int inner_iterations = 0;
  bool converged = false;
  double max_violation = 0.0;     // largest constraint excess in native units
  double F_max = 0.0;
  double M_max = 0.0;
  // Per k = 0 ... N-1.
  std::vector<double> a_L;
  std::vector<double> F;
  std::vector<double> M;
  std::vector<int> active_acceleration;
  std::vector<int> active_force;
  std::vector<int> active_torque;
};

struct OptimizationResult {
  ReferenceTrajectory trajectory;
  OptimizationReport report;
};

/// Raised for infeasible problems or solver failure; carries the best iterate found.
class OptimizationError : public std::runtime_error {
 public:
  OptimizationError(const std::string& what, OptimizationResult best)
      : std::runtime_error(what), best_(std::move(best)) {}
  const OptimizationResult& best() const { return best_; }

 private:
  OptimizationResult best_;
};

/// Degree-7 rest-to-rest initializer matching the problem's sample layout.
ReferenceTrajectory initial_reference(const OptimizationProblem& problem);

/// Evaluates a_L, F, M and the active sets of a trajectory (epsilon taken as max a_L).
OptimizationReport evaluate_reference(const OptimizationProblem& problem,
                                      const ReferenceTrajectory& ref, const CraneParams& params);

/// min eps s.t. a_L(k) <= eps, |F(k)| <= F_max, |M(k)| <= M_max for k = 0 ... N-1,
/// over the samples y_d(4) ... y_d(N-1). Samples 0..3 and N..N+3 stay fixed.
OptimizationResult optimize_minimax_acceleration(const OptimizationProblem& problem,
                                                 const ReferenceTrajectory& init,
                                                 const CraneParams& params);

/// JSON report: eps*, iterations, per-k constraint values and active sets.
void write_report_json(std::ostream& out, const OptimizationReport& report);

}  // namespace gantry
