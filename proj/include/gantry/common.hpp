#pragma once

#include <Eigen/Core>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace gantry {

/// Angles with |theta| at or beyond this bound are rejected everywhere.
inline constexpr double kAngleGuard = std::numbers::pi / 2.0 * (1.0 - 1e-6);
/// Minimum admissible vertical load position (rope length proxy) [m].
inline constexpr double kMinLoadDepth = 1e-4;

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Raised where a map of the flat parameterization loses rank.
class SingularityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Plain value of a (possibly nested) autodiff scalar.
inline double scalar_value(double x) { return x; }

template <typename Scalar>
double scalar_value(const Scalar& x) {
  return scalar_value(x.value());
}

template <typename Scalar>
using Vector2 = Eigen::Matrix<Scalar, 2, 1>;
template <typename Scalar>
using Vector6 = Eigen::Matrix<Scalar, 6, 1>;

/// Five consecutive flat-output samples y(k), ..., y(k+4); column 0 is x_L, column 1 is y_L.
template <typename Scalar>
using FlatWindow = Eigen::Matrix<Scalar, 5, 2>;

/// Reference flat-output samples y_d(k), ..., y_d(k+4) in the same layout as FlatWindow.
using ReferenceWindow = FlatWindow<double>;

}  // namespace gantry
