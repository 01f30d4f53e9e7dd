#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "gantry/crane_model.hpp"

namespace gantry {

/// Number of leading rest samples demanded by the controllers (r - 1 = 3 shifts).
inline constexpr int kRestPadding = 4;

/// Derivatives 0..4 (rows) of both flat-output channels (columns) at a time instant.
using ReferenceDerivatives = Eigen::Matrix<double, 5, 2>;

/// Sampled flat-output reference y_d(k), k = 0 ... N + 3.
struct ReferenceTrajectory {
  double sample_time = 0.01;
  std::vector<Eigen::Vector2d> samples;
  /// Index of the first terminal rest sample: samples N ... N+3 equal `end`.
  int transition_end = 0;
  Eigen::Vector2d start = Eigen::Vector2d::Zero();
  Eigen::Vector2d end = Eigen::Vector2d::Zero();
  /// Analytic derivatives of the underlying continuous reference, when one exists.
  std::function<ReferenceDerivatives(double)> continuous;

  int size() const { return static_cast<int>(samples.size()); }
  /// Sample k; indices past the end hold the last sample.
  Eigen::Vector2d at(int k) const;
  /// y_d(k), ..., y_d(k+4).
  ReferenceWindow window(int k) const;
  double time(int k) const { return k * sample_time; }
  /// Time at which the terminal rest position is reached.
  double transition_end_time() const { return transition_end * sample_time; }

  /// Throws ValidationError unless the first 4 samples equal the first sample and
  /// samples transition_end ... transition_end + 3 equal the last one.
  void check_rest_padding() const;
  /// Throws ValidationError naming the first k whose window flat_parameterize rejects.
  void check_admissible(const CraneParams& params) const;
};

/// Septic rest-to-rest transition s(tau) = 35 tau^4 - 84 tau^5 + 70 tau^6 - 20 tau^7 and
/// its derivatives with respect to tau (order 0..4); tau is clamped to [0, 1].
Eigen::Matrix<double, 5, 1> rest_to_rest_profile(double tau);

/// Degree-7 rest-to-rest polynomial per channel from y0 (at t = start_time) to yT
/// (at t = start_time + duration) with vanishing derivatives 1..3 at both ends.
class RestToRestPolynomial {
 public:
  RestToRestPolynomial(Eigen::Vector2d y0, Eigen::Vector2d yT, double duration,
                       double start_time = 0.0);

  Eigen::Vector2d value(double t) const { return derivatives(t).row(0).transpose(); }
  ReferenceDerivatives derivatives(double t) const;
  /// Monomial coefficients c_0..c_7 in (t - start_time) for one channel.
  Eigen::Matrix<double, 8, 1> coefficients(int channel) const;

 private:
  Eigen::Vector2d y0_, yT_;
  double duration_, start_time_;
};

/// Rest-to-rest polynomial transition sampled at t = k T_s. The polynomial starts at
/// t = 3 T_s so samples 0..3 equal y0 exactly, and samples N..N+3 equal yT with
/// N = 3 + ceil(T / T_s).
ReferenceTrajectory polynomial_reference(const Eigen::Vector2d& y0, const Eigen::Vector2d& yT,
                                         double duration, double sample_time);

struct LyingEightGeometry {
  Eigen::Vector2d center{0.6, 0.6};
  double width = 0.6;
  double height = 0.15;
  double period = 6.0;
};

/// Closed figure-eight path: x one sine period, y two, traversed with a rest-to-rest phase.
/// Validated for admissibility under `params`.
ReferenceTrajectory lying_eight_reference(const LyingEightGeometry& geometry, double sample_time,
                                          const CraneParams& params);

/// CSV with header `k,t,x_L,y_L`.
void write_reference_csv(std::ostream& out, const ReferenceTrajectory& ref);
ReferenceTrajectory read_reference_csv(std::istream& in);

}  // namespace gantry
