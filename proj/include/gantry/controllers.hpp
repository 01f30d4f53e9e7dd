#pragma once

// Discrete-time exact-linearization tracking controllers for the Euler
// sampled-data crane model.

#include <array>
#include <complex>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "gantry/crane_model.hpp"

namespace gantry {

/// Linear error dynamics of one flat-output channel:
///   e[order] + a_{order-1} e[order-1] + ... + a_0 e = -a_I e_I   (integral part optional)
struct ChannelErrorDynamics {
  std::vector<double> coefficients;  // a_0 ... a_{order-1}
  double integral_gain = 0.0;        // a_I
  bool integral = false;

  int order() const { return static_cast<int>(coefficients.size()); }
};

/// Channel 0 is x_L, channel 1 is y_L.
struct ErrorDynamicsSpec {
  std::array<ChannelErrorDynamics, 2> channels;

  /// Throws ValidationError unless every channel has the expected order and all
  /// eigenvalues of the (integral-extended) companion matrices lie strictly inside
  /// the unit circle. `sample_time` enters the integral row.
  void validate(std::array<int, 2> expected_orders, double sample_time) const;
};

/// Companion matrix of the error recursion (state e, e[1], ..., e[order-1]).
Eigen::MatrixXd companion_matrix(const ChannelErrorDynamics& channel);
/// Companion matrix extended by the integrated error (state e_I, e, ..., e[order-1]).
Eigen::MatrixXd integral_companion_matrix(const ChannelErrorDynamics& channel, double sample_time);

/// Monic polynomial z^n + c_{n-1} z^{n-1} + ... + c_0 with the given roots; returns c_0..c_{n-1}.
/// Roots must have magnitude < 1 and non-real roots must come in conjugate pairs.
std::vector<double> monic_coefficients(std::span<const std::complex<double>> roots);

/// Real coefficients c_0..c_{n-1} of prod (z - root_i), without checks on the roots.
std::vector<double> expand_monic(std::span<const std::complex<double>> roots);

/// Channel with the given closed-loop roots (order = roots.size()).
ChannelErrorDynamics place_channel(std::span<const std::complex<double>> roots);
/// Channel whose integral-extended error dynamics has the given roots (order = roots.size() - 1).
ChannelErrorDynamics place_channel_with_integral(std::span<const std::complex<double>> roots,
                                                 double sample_time);

/// Pole placement for both channels (no integral parts).
ErrorDynamicsSpec pole_place(const std::array<std::vector<std::complex<double>>, 2>& roots);

/// Repeats one real root `order` times per channel.
ErrorDynamicsSpec uniform_spec(double root, std::array<int, 2> orders);

/// Controller state of the dynamic feedback: y_L two and three shifts ahead.
struct DynamicControllerState {
  double z1 = 0.0;
  double z2 = 0.0;

  /// Starts the loop on the reference manifold: z = (y_Ld(2), y_Ld(3)).
  static DynamicControllerState from_reference(const ReferenceWindow& ref) {
    return {ref(2, 1), ref(3, 1)};
  }
};

/// Integrated tracking error per channel [m s].
struct IntegralState {
  Eigen::Vector2d e_I = Eigen::Vector2d::Zero();
};

/// e_I+ = e_I + T_s e while active; frozen otherwise.
IntegralState integral_update(const IntegralState& state, const Eigen::Vector2d& error, bool active,
                              double sample_time);

/// Flat output and forward shifts y, y[1], y[2], y[3] (rows) of both channels (columns)
/// implied by the state together with y_L[2], y_L[3]. This inverts the map
/// (y, ..., y[3]) -> (x, y_L[2], y_L[3]); it is regular at theta = omega_theta = 0.
Eigen::Matrix<double, 4, 2> reconstruct_shifts(const TransformedState<double>& x, double yL2,
                                               double yL3, const CraneParams& params,
                                               double sample_time);

struct DynamicFeedbackOutput {
  Input<double> input;
  DynamicControllerState next;
  Eigen::Vector2d v;                       // new input y[4] per channel
  Eigen::Matrix<double, 4, 2> shifts;      // y, ..., y[3] reconstructed from (x, z)
};

/// Linearizing endogenous dynamic feedback with error dynamics of order (4, 4).
DynamicFeedbackOutput dynamic_feedback_step(const TransformedState<double>& x,
                                            const DynamicControllerState& z,
                                            const ReferenceWindow& ref,
                                            const ErrorDynamicsSpec& spec,
                                            const CraneParams& params, double sample_time,
                                            const IntegralState& integral = {});

struct QuasiStaticOutput {
  Input<double> input;
  double v_x = 0.0;                        // x_L[4]
  Eigen::Vector3d v_y = Eigen::Vector3d::Zero();  // y_L[2], y_L[3], y_L[4]
  Eigen::Matrix<double, 4, 2> shifts;      // predicted y, ..., y[3]
};

/// Quasi-static state feedback with generalized Brunovsky state
/// (x_L, ..., x_L[3], y_L, y_L[1]) and error dynamics of order (4, 2). Stateless.
QuasiStaticOutput quasi_static_feedback(const TransformedState<double>& x,
                                        const ReferenceWindow& ref, const ErrorDynamicsSpec& spec,
                                        const CraneParams& params, double sample_time,
                                        const IntegralState& integral = {});

inline Input<double> quasi_static_feedback_step(const TransformedState<double>& x,
                                                const ReferenceWindow& ref,
                                                const ErrorDynamicsSpec& spec,
                                                const CraneParams& params, double sample_time,
                                                const IntegralState& integral = {}) {
  return quasi_static_feedback(x, ref, spec, params, sample_time, integral).input;
}

/// Friction coefficients for one actuator, selected by the sign of the desired velocity.
struct AsymmetricFriction {
  double viscous_pos = 0.0;
  double viscous_neg = 0.0;
  double coulomb_pos = 0.0;
  double coulomb_neg = 0.0;

  static AsymmetricFriction symmetric(double viscous, double coulomb) {
    return {viscous, viscous, coulomb, coulomb};
  }
  /// r_v v + r_C sign(v), with sign(0) = 0.
  double compensation(double velocity) const;
};

struct FrictionCompensation {
  AsymmetricFriction trolley;
  AsymmetricFriction drum;

  static FrictionCompensation from_params(const CraneParams& p) {
    return {AsymmetricFriction::symmetric(p.r_vT, p.r_CT),
            AsymmetricFriction::symmetric(p.r_vphi, p.r_Cphi)};
  }
};

/// Feedforward (F_fr, M_fr) added to the controller output.
Input<double> friction_feedforward(double v_Td, double omega_phid,
                                   const FrictionCompensation& coefficients);

/// Desired trolley velocity and drum angular velocity along the reference at the
/// window's first sample.
Eigen::Vector2d desired_actuator_velocities(const ReferenceWindow& ref, const CraneParams& params,
                                            double sample_time);

}  // namespace gantry
