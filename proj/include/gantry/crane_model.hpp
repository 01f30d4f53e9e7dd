#pragma once

// Gantry crane dynamics in trolley coordinates and in load coordinates, the
// Euler sampled-data model in load coordinates and its parameterizing map.
//
// Everything here is templated on the scalar type so the optimizer can push
// Eigen::AutoDiffScalar through the parameterizing map.

#include <cmath>
#include <sstream>
#include <string>

#include "gantry/common.hpp"
#include "gantry/crane_params.hpp"
#include "gantry/states.hpp"

namespace gantry {

namespace detail {

template <typename Scalar>
std::string describe(const OriginalState<Scalar>& s) {
  std::ostringstream os;
  os << "(x_T=" << scalar_value(s.x_T) << ", phi=" << scalar_value(s.phi)
     << ", theta=" << scalar_value(s.theta) << ", v_T=" << scalar_value(s.v_T)
     << ", omega_phi=" << scalar_value(s.omega_phi)
     << ", omega_theta=" << scalar_value(s.omega_theta) << ")";
  return os.str();
}

template <typename Scalar>
std::string describe(const TransformedState<Scalar>& s) {
  std::ostringstream os;
  os << "(x_L=" << scalar_value(s.x_L) << ", y_L=" << scalar_value(s.y_L)
     << ", v_Lx=" << scalar_value(s.v_Lx) << ", v_Ly=" << scalar_value(s.v_Ly)
     << ", theta=" << scalar_value(s.theta)
     << ", omega_theta=" << scalar_value(s.omega_theta) << ")";
  return os.str();
}

template <typename Scalar>
void check_angle(const Scalar& theta, const char* where) {
  if (!(std::abs(scalar_value(theta)) < kAngleGuard)) {
    std::ostringstream os;
    os << where << ": pendulum angle " << scalar_value(theta)
       << " rad outside (-pi/2, pi/2) guard";
    throw DomainError(os.str());
  }
}

// Rope tension S and the affine input dependence of it. The tension follows from
// eliminating the accelerations of trolley, drum and load along the rope:
//   S * (R^2/J + sin^2/m_T + 1/m_L) = g cos + l omega^2 + sin F / m_T - R M / J.
template <typename Scalar>
struct TensionTerms {
  Scalar denom;   // R^2/J + sin^2/m_T + 1/m_L
  Scalar free;    // S at F = M = 0
  Scalar dF;      // dS/dF
  Scalar dM;      // dS/dM
};

template <typename Scalar>
TensionTerms<Scalar> tension_terms(const Scalar& sin_t, const Scalar& cos_t, const Scalar& length,
                                   const Scalar& omega_theta, const CraneParams& p) {
  const Scalar denom = Scalar(p.R * p.R / p.J) + sin_t * sin_t / p.m_T + Scalar(1.0 / p.m_L);
  TensionTerms<Scalar> t{denom, (p.g * cos_t + length * omega_theta * omega_theta) / denom,
                         sin_t / (p.m_T * denom), Scalar(-p.R / p.J) / denom};
  return t;
}

}  // namespace detail

/// Domain check shared by all operations on trolley coordinates.
template <typename Scalar>
void check_domain(const OriginalState<Scalar>& s, const CraneParams& p) {
  detail::check_angle(s.theta, "original state");
  using std::cos;
  const double depth = p.R * scalar_value(s.phi) * std::cos(scalar_value(s.theta));
  if (!(depth > kMinLoadDepth)) {
    throw DomainError("original state " + detail::describe(s) +
                      ": load depth R*phi*cos(theta) must exceed 1e-4 m");
  }
}

template <typename Scalar>
void check_domain(const TransformedState<Scalar>& s, const CraneParams&) {
  detail::check_angle(s.theta, "transformed state");
  if (!(scalar_value(s.y_L) > kMinLoadDepth)) {
    throw DomainError("transformed state " + detail::describe(s) + ": y_L must exceed 1e-4 m");
  }
}

/// Time derivative of the trolley-coordinate state: (v_T, omega_phi, omega_theta,
/// trolley acceleration, drum angular acceleration, pendulum angular acceleration).
template <typename Scalar>
Vector6<Scalar> continuous_dynamics(const OriginalState<Scalar>& s, const Input<Scalar>& u,
                                    const CraneParams& p) {
  using std::cos;
  using std::sin;
  const double l_value = p.R * scalar_value(s.phi);
  if (!(l_value > 0.0)) {
    throw SingularityError("mass matrix singular (rope length R*phi <= 0) at state " +
                           detail::describe(s));
  }
  check_domain(s, p);

  const Scalar sin_t = sin(s.theta);
  const Scalar cos_t = cos(s.theta);
  const Scalar length = p.R * s.phi;
  const auto t = detail::tension_terms(sin_t, cos_t, length, s.omega_theta, p);
  const Scalar tension = t.free + t.dF * u.F + t.dM * u.M;

  const Scalar acc_trolley = (u.F - tension * sin_t) / p.m_T;
  const Scalar acc_drum = (u.M + p.R * tension) / p.J;
  const Scalar acc_pendulum =
      (cos_t * acc_trolley - 2.0 * p.R * s.omega_phi * s.omega_theta - p.g * sin_t) / length;

  Vector6<Scalar> dx;
  dx << s.v_T, s.omega_phi, s.omega_theta, acc_trolley, acc_drum, acc_pendulum;
  return dx;
}

/// Trolley coordinates -> load coordinates.
template <typename Scalar>
TransformedState<Scalar> transform_to_load_coords(const OriginalState<Scalar>& s,
                                                  const CraneParams& p) {
  using std::cos;
  using std::sin;
  check_domain(s, p);
  const Scalar sin_t = sin(s.theta);
  const Scalar cos_t = cos(s.theta);
  TransformedState<Scalar> out;
  out.x_L = s.x_T - p.R * s.phi * sin_t;
  out.y_L = p.R * s.phi * cos_t;
  out.v_Lx = s.v_T - s.omega_phi * p.R * sin_t - s.omega_theta * p.R * s.phi * cos_t;
  out.v_Ly = p.R * (s.omega_phi * cos_t - sin_t * s.phi * s.omega_theta);
  out.theta = s.theta;
  out.omega_theta = s.omega_theta;
  return out;
}

/// Load coordinates -> trolley coordinates.
template <typename Scalar>
OriginalState<Scalar> inverse_transform(const TransformedState<Scalar>& s, const CraneParams& p) {
  using std::cos;
  using std::sin;
  check_domain(s, p);
  const Scalar sin_t = sin(s.theta);
  const Scalar cos_t = cos(s.theta);
  const Scalar length = s.y_L / cos_t;
  // Rope length rate from v_Ly = l' cos - l sin omega.
  const Scalar length_rate = (s.v_Ly + length * sin_t * s.omega_theta) / cos_t;

  OriginalState<Scalar> out;
  out.phi = length / p.R;
  out.x_T = s.x_L + length * sin_t;
  out.theta = s.theta;
  out.omega_phi = length_rate / p.R;
  out.v_T = s.v_Lx + length_rate * sin_t + s.omega_theta * length * cos_t;
  out.omega_theta = s.omega_theta;
  return out;
}

/// Time derivative in load coordinates: (v_Lx, v_Ly, a_Lx, a_Ly, omega_theta, alpha_theta).
/// The load accelerations satisfy a_Ly = g - a_Lx / tan(theta) identically.
template <typename Scalar>
Vector6<Scalar> transformed_dynamics(const TransformedState<Scalar>& s, const Input<Scalar>& u,
                                     const CraneParams& p) {
  using std::cos;
  using std::sin;
  check_domain(s, p);
  const Scalar sin_t = sin(s.theta);
  const Scalar cos_t = cos(s.theta);
  const Scalar length = s.y_L / cos_t;
  const Scalar length_rate = (s.v_Ly + length * sin_t * s.omega_theta) / cos_t;

  const auto t = detail::tension_terms(sin_t, cos_t, length, s.omega_theta, p);
  const Scalar tension = t.free + t.dF * u.F + t.dM * u.M;
  const Scalar acc_trolley = (u.F - tension * sin_t) / p.m_T;

  Vector6<Scalar> dx;
  dx << s.v_Lx, s.v_Ly, tension * sin_t / p.m_L, p.g - tension * cos_t / p.m_L, s.omega_theta,
      (cos_t * acc_trolley - 2.0 * length_rate * s.omega_theta - p.g * sin_t) / length;
  return dx;
}

/// Forward-flat sampled-data model: x+ = x + T_s f(x, u) in load coordinates.
template <typename Scalar>
TransformedState<Scalar> euler_step(const TransformedState<Scalar>& s, const Input<Scalar>& u,
                                    const CraneParams& p, double sample_time) {
  if (!(sample_time > 0.0)) throw ValidationError("sampling time must be positive");
  return TransformedState<Scalar>::from_vector(s.vector() +
                                               sample_time * transformed_dynamics(s, u, p));
}

/// Inputs of the triangular form: horizontal load acceleration and pendulum angular acceleration.
template <typename Scalar = double>
struct TriangularInput {
  Scalar a_Lx{0};
  Scalar alpha_theta{0};
};

/// Input transformation (F, M) -> (a_Lx, alpha_theta) at state s.
template <typename Scalar>
TriangularInput<Scalar> to_triangular_input(const TransformedState<Scalar>& s,
                                            const Input<Scalar>& u, const CraneParams& p) {
  const Vector6<Scalar> f = transformed_dynamics(s, u, p);
  return {f(2), f(5)};
}

/// Euler step of the structurally flat triangular form, driven by (a_Lx, alpha_theta).
/// Requires sin(theta) != 0 because of the g - a_Lx / tan(theta) row.
template <typename Scalar>
TransformedState<Scalar> triangular_euler_step(const TransformedState<Scalar>& s,
                                               const TriangularInput<Scalar>& w,
                                               const CraneParams& p, double sample_time) {
  using std::tan;
  if (scalar_value(s.theta) == 0.0) {
    throw SingularityError("triangular form undefined at theta = 0");
  }
  TransformedState<Scalar> out;
  out.x_L = s.x_L + sample_time * s.v_Lx;
  out.y_L = s.y_L + sample_time * s.v_Ly;
  out.v_Lx = s.v_Lx + sample_time * w.a_Lx;
  out.v_Ly = s.v_Ly + sample_time * (p.g - w.a_Lx / tan(s.theta));
  out.theta = s.theta + sample_time * s.omega_theta;
  out.omega_theta = s.omega_theta + sample_time * w.alpha_theta;
  return out;
}

/// Inputs (F, M) that produce rope tension `tension` and pendulum angular acceleration
/// `alpha_theta` at state s. Regular on the whole valid domain (the determinant is
/// proportional to cos(theta)).
template <typename Scalar>
Input<Scalar> input_from_tension(const TransformedState<Scalar>& s, const Scalar& tension,
                                 const Scalar& alpha_theta, const CraneParams& p) {
  using std::cos;
  using std::sin;
  check_domain(s, p);
  const Scalar sin_t = sin(s.theta);
  const Scalar cos_t = cos(s.theta);
  const Scalar length = s.y_L / cos_t;
  const Scalar length_rate = (s.v_Ly + length * sin_t * s.omega_theta) / cos_t;
  const auto t = detail::tension_terms(sin_t, cos_t, length, s.omega_theta, p);

  Input<Scalar> u;
  u.F = p.m_T * (length * alpha_theta + 2.0 * length_rate * s.omega_theta + p.g * sin_t) / cos_t +
        tension * sin_t;
  u.M = (tension - t.free - t.dF * u.F) / t.dM;
  return u;
}

template <typename Scalar = double>
struct FlatParameterization {
  TransformedState<Scalar> state;
  Input<Scalar> input;
};

/// Discrete parameterizing map of the Euler model: the unique (state(k), input(k))
/// whose trajectory emits the flat-output samples y(k), ..., y(k+4).
///
/// Velocities and accelerations are forward differences; the pendulum angle is
/// atan2(a_x, g - a_y), which is regular at rest. The state uses shifts up to 3,
/// the input up to 4.
template <typename Scalar>
FlatParameterization<Scalar> flat_parameterize(const FlatWindow<Scalar>& y, const CraneParams& p,
                                               double sample_time) {
  using std::atan2;
  using std::sqrt;
  if (!(sample_time > 0.0)) throw ValidationError("sampling time must be positive");
  const double h = sample_time;

  // Element-wise so nested autodiff scalars only meet plain doubles in scalar ops.
  Eigen::Matrix<Scalar, 4, 2> vel;
  Eigen::Matrix<Scalar, 3, 2> acc;
  for (int c = 0; c < 2; ++c) {
    for (int i = 0; i < 4; ++i) vel(i, c) = (y(i + 1, c) - y(i, c)) / h;
    for (int i = 0; i < 3; ++i) acc(i, c) = (vel(i + 1, c) - vel(i, c)) / h;
  }

  Eigen::Matrix<Scalar, 3, 1> theta;
  for (int i = 0; i < 3; ++i) {
    const Scalar horizontal = acc(i, 0);
    const Scalar vertical = p.g - acc(i, 1);
    const double ax = scalar_value(horizontal);
    const double gv = scalar_value(vertical);
    if (std::hypot(ax, gv) < 1e-9 * p.g) {
      std::ostringstream os;
      os << "pendulum angle undefined (free fall) at window shift " << i;
      throw SingularityError(os.str());
    }
    if (!(gv > 0.0)) {
      std::ostringstream os;
      os << "window shift " << i << ": g - a_y = " << gv
         << " <= 0 puts the pendulum angle outside (-pi/2, pi/2)";
      throw DomainError(os.str());
    }
    theta(i) = atan2(horizontal, vertical);
    detail::check_angle(theta(i), "flat_parameterize");
  }
  const Scalar omega0 = (theta(1) - theta(0)) / h;
  const Scalar omega1 = (theta(2) - theta(1)) / h;
  const Scalar alpha = (omega1 - omega0) / h;

  FlatParameterization<Scalar> out;
  out.state.x_L = y(0, 0);
  out.state.y_L = y(0, 1);
  out.state.v_Lx = vel(0, 0);
  out.state.v_Ly = vel(0, 1);
  out.state.theta = theta(0);
  out.state.omega_theta = omega0;
  check_domain(out.state, p);

  const Scalar gv = p.g - acc(0, 1);
  const Scalar tension = p.m_L * sqrt(acc(0, 0) * acc(0, 0) + gv * gv);
  out.input = input_from_tension(out.state, tension, alpha, p);
  return out;
}

/// Total mechanical energy of the crane in trolley coordinates (potential zero at y_L = 0).
inline double mechanical_energy(const OriginalState<double>& s, const CraneParams& p) {
  const double st = std::sin(s.theta), ct = std::cos(s.theta);
  const double l = p.R * s.phi;
  const double vx = s.v_T - p.R * s.omega_phi * st - l * ct * s.omega_theta;
  const double vy = p.R * s.omega_phi * ct - l * st * s.omega_theta;
  return 0.5 * p.m_T * s.v_T * s.v_T + 0.5 * p.J * s.omega_phi * s.omega_phi +
         0.5 * p.m_L * (vx * vx + vy * vy) - p.m_L * p.g * l * ct;
}

}  // namespace gantry
