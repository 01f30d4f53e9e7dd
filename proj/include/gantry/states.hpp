#pragma once

#include "gantry/common.hpp"

namespace gantry {

/// State in trolley/drum/pendulum coordinates.
template <typename Scalar = double>
struct OriginalState {
  Scalar x_T{0};          // trolley position [m]
  Scalar phi{0};          // drum angle [rad]
  Scalar theta{0};        // pendulum angle [rad]
  Scalar v_T{0};          // trolley velocity [m/s]
  Scalar omega_phi{0};    // drum angular velocity [rad/s]
  Scalar omega_theta{0};  // pendulum angular velocity [rad/s]

  Vector6<Scalar> vector() const {
    Vector6<Scalar> v;
    v << x_T, phi, theta, v_T, omega_phi, omega_theta;
    return v;
  }
  static OriginalState from_vector(const Vector6<Scalar>& v) {
    return {v(0), v(1), v(2), v(3), v(4), v(5)};
  }
};

/// State in load coordinates; contains the flat output and its first derivative.
template <typename Scalar = double>
struct TransformedState {
  Scalar x_L{0};          // horizontal load position [m]
  Scalar y_L{0};          // vertical load position, positive down [m]
  Scalar v_Lx{0};
  Scalar v_Ly{0};
  Scalar theta{0};
  Scalar omega_theta{0};

  Vector6<Scalar> vector() const {
    Vector6<Scalar> v;
    v << x_L, y_L, v_Lx, v_Ly, theta, omega_theta;
    return v;
  }
  static TransformedState from_vector(const Vector6<Scalar>& v) {
    return {v(0), v(1), v(2), v(3), v(4), v(5)};
  }
  Vector2<Scalar> flat_output() const { return {x_L, y_L}; }
};

/// Trolley force and drum torque.
template <typename Scalar = double>
struct Input {
  Scalar F{0};  // [N]
  Scalar M{0};  // [N m]

  Vector2<Scalar> vector() const { return {F, M}; }
  Input operator+(const Input& o) const { return {F + o.F, M + o.M}; }
};

}  // namespace gantry
