#include "gantry/controllers.hpp"

#include <Eigen/Eigenvalues>
#include <sstream>

namespace gantry {

namespace {

double feedback(const ChannelErrorDynamics& ch, double target, const Eigen::VectorXd& errors,
                double integrated_error) {
  double v = target;
  for (int i = 0; i < ch.order(); ++i) v -= ch.coefficients[i] * errors(i);
  if (ch.integral) v -= ch.integral_gain * integrated_error;
  return v;
}

void check_orders(const ErrorDynamicsSpec& spec, int x_order, int y_order, const char* who) {
  if (spec.channels[0].order() != x_order || spec.channels[1].order() != y_order) {
    std::ostringstream os;
    os << who << " needs error dynamics of order (" << x_order << ", " << y_order << "), got ("
       << spec.channels[0].order() << ", " << spec.channels[1].order() << ")";
    throw ValidationError(os.str());
  }
}

}  // namespace

Eigen::MatrixXd companion_matrix(const ChannelErrorDynamics& channel) {
  const int n = channel.order();
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i + 1 < n; ++i) A(i, i + 1) = 1.0;
  for (int i = 0; i < n; ++i) A(n - 1, i) = -channel.coefficients[i];
  return A;
}

Eigen::MatrixXd integral_companion_matrix(const ChannelErrorDynamics& channel, double sample_time) {
  const int n = channel.order();
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n + 1, n + 1);
  A(0, 0) = 1.0;
  A(0, 1) = sample_time;
  A.bottomRightCorner(n, n) = companion_matrix(channel);
  A(n, 0) = -channel.integral_gain;
  return A;
}

void ErrorDynamicsSpec::validate(std::array<int, 2> expected_orders, double sample_time) const {
  for (int j = 0; j < 2; ++j) {
    const auto& ch = channels[j];
    if (ch.order() != expected_orders[j]) {
      std::ostringstream os;
      os << "channel " << j << ": error dynamics order " << ch.order() << ", expected "
         << expected_orders[j];
      throw ValidationError(os.str());
    }
    const Eigen::MatrixXd A =
        ch.integral ? integral_companion_matrix(ch, sample_time) : companion_matrix(ch);
    const Eigen::VectorXcd eig = Eigen::EigenSolver<Eigen::MatrixXd>(A, false).eigenvalues();
    for (int i = 0; i < eig.size(); ++i) {
      if (!(std::abs(eig(i)) < 1.0)) {
        std::ostringstream os;
        os << "channel " << j << ": error dynamics eigenvalue " << eig(i)
           << " not strictly inside the unit circle";
        throw ValidationError(os.str());
      }
    }
  }
}

std::vector<double> monic_coefficients(std::span<const std::complex<double>> roots) {
  for (const auto& r : roots) {
    if (!(std::abs(r) < 1.0)) {
      std::ostringstream os;
      os << "root " << r << " is not strictly inside the unit circle";
      throw ValidationError(os.str());
    }
    if (r.imag() != 0.0) {
      const auto conj = std::conj(r);
      const bool paired = std::any_of(roots.begin(), roots.end(), [&](const auto& q) {
        return std::abs(q - conj) <= 1e-12 * std::max(1.0, std::abs(r));
      });
      if (!paired) {
        std::ostringstream os;
        os << "complex root " << r << " has no conjugate partner";
        throw ValidationError(os.str());
      }
    }
  }
  return expand_monic(roots);
}

std::vector<double> expand_monic(std::span<const std::complex<double>> roots) {
  // poly holds coefficients from z^0 upwards.
  std::vector<std::complex<double>> poly{1.0};
  for (const auto& r : roots) {
    std::vector<std::complex<double>> next(poly.size() + 1, 0.0);
    for (std::size_t i = 0; i < poly.size(); ++i) {
      next[i + 1] += poly[i];
      next[i] -= r * poly[i];
    }
    poly = std::move(next);
  }
  std::vector<double> out(roots.size());
  for (std::size_t i = 0; i < roots.size(); ++i) out[i] = poly[i].real();
  return out;
}

ChannelErrorDynamics place_channel(std::span<const std::complex<double>> roots) {
  ChannelErrorDynamics ch;
  ch.coefficients = monic_coefficients(roots);
  return ch;
}

ChannelErrorDynamics place_channel_with_integral(std::span<const std::complex<double>> roots,
                                                 double sample_time) {
  if (roots.size() < 2) throw ValidationError("integral extension needs at least two roots");
  if (!(sample_time > 0.0)) throw ValidationError("sampling time must be positive");
  // Extended characteristic polynomial: (z - 1) q(z) + a_I T_s with q monic of degree n.
  std::vector<double> p = monic_coefficients(roots);
  p.push_back(1.0);
  double p_at_one = 0.0;
  for (double c : p) p_at_one += c;
  const std::size_t n = roots.size() - 1;
  // Synthetic division of p(z) - p(1) by (z - 1), from the top coefficient down.
  std::vector<double> q(n + 1);
  q[n] = p[n + 1];
  for (std::size_t i = n; i-- > 0;) q[i] = p[i + 1] + q[i + 1];
  ChannelErrorDynamics ch;
  ch.coefficients.assign(q.begin(), q.begin() + static_cast<std::ptrdiff_t>(n));
  ch.integral_gain = p_at_one / sample_time;
  ch.integral = true;
  return ch;
}

ErrorDynamicsSpec pole_place(const std::array<std::vector<std::complex<double>>, 2>& roots) {
  ErrorDynamicsSpec spec;
  for (int j = 0; j < 2; ++j) spec.channels[j] = place_channel(roots[j]);
  return spec;
}

ErrorDynamicsSpec uniform_spec(double root, std::array<int, 2> orders) {
  std::array<std::vector<std::complex<double>>, 2> roots;
  for (int j = 0; j < 2; ++j) roots[j].assign(orders[j], std::complex<double>(root, 0.0));
  return pole_place(roots);
}

IntegralState integral_update(const IntegralState& state, const Eigen::Vector2d& error,
                              bool active, double sample_time) {
  if (!active) return state;
  return IntegralState{state.e_I + sample_time * error};
}

Eigen::Matrix<double, 4, 2> reconstruct_shifts(const TransformedState<double>& x, double yL2,
                                               double yL3, const CraneParams& p,
                                               double sample_time) {
  check_domain(x, p);
  const double h = sample_time;
  Eigen::Matrix<double, 4, 2> y;
  y(0, 0) = x.x_L;
  y(0, 1) = x.y_L;
  y(1, 0) = x.x_L + h * x.v_Lx;
  y(1, 1) = x.y_L + h * x.v_Ly;
  y(2, 1) = yL2;
  y(3, 1) = yL3;

  const double theta1 = x.theta + h * x.omega_theta;
  const double thetas[2] = {x.theta, theta1};
  for (int i = 0; i < 2; ++i) {
    const double a_y = (y(i + 2, 1) - 2.0 * y(i + 1, 1) + y(i, 1)) / (h * h);
    const double vertical = p.g - a_y;
    if (!(vertical > 0.0) || !(std::abs(thetas[i]) < kAngleGuard)) {
      std::ostringstream os;
      os << "shift reconstruction singular at " << detail::describe(x) << " (shift " << i
         << ": g - a_y = " << vertical << ", theta = " << thetas[i] << ")";
      throw SingularityError(os.str());
    }
    const double a_x = vertical * std::tan(thetas[i]);
    y(i + 2, 0) = 2.0 * y(i + 1, 0) - y(i, 0) + h * h * a_x;
  }
  return y;
}

DynamicFeedbackOutput dynamic_feedback_step(const TransformedState<double>& x,
                                            const DynamicControllerState& z,
                                            const ReferenceWindow& ref,
                                            const ErrorDynamicsSpec& spec,
                                            const CraneParams& params, double sample_time,
                                            const IntegralState& integral) {
  check_orders(spec, 4, 4, "dynamic feedback");
  DynamicFeedbackOutput out;
  out.shifts = reconstruct_shifts(x, z.z1, z.z2, params, sample_time);
  for (int j = 0; j < 2; ++j) {
    const Eigen::Vector4d errors = out.shifts.col(j) - ref.col(j).head<4>();
    out.v(j) = feedback(spec.channels[j], ref(4, j), errors, integral.e_I(j));
  }
  FlatWindow<double> window;
  window.topRows<4>() = out.shifts;
  window.row(4) = out.v.transpose();
  out.input = flat_parameterize(window, params, sample_time).input;
  out.next = {out.shifts(3, 1), out.v(1)};
  return out;
}

QuasiStaticOutput quasi_static_feedback(const TransformedState<double>& x,
                                        const ReferenceWindow& ref, const ErrorDynamicsSpec& spec,
                                        const CraneParams& params, double sample_time,
                                        const IntegralState& integral) {
  check_orders(spec, 4, 2, "quasi-static feedback");
  check_domain(x, params);
  const double h = sample_time;
  const auto& cy = spec.channels[1];
  const double a0 = cy.coefficients[0];
  const double a1 = cy.coefficients[1];
  const double aI = cy.integral ? cy.integral_gain : 0.0;

  // y_L channel: v, v[1], v[2] from top to bottom; shifted integral states follow
  // e_I[p+1] = e_I[p] + T_s e[p].
  const double e0 = x.y_L - ref(0, 1);
  const double e1 = x.y_L + h * x.v_Ly - ref(1, 1);
  const double eI0 = integral.e_I(1);
  const double eI1 = eI0 + h * e0;
  const double eI2 = eI1 + h * e1;

  QuasiStaticOutput out;
  out.v_y(0) = ref(2, 1) - a1 * e1 - a0 * e0 - aI * eI0;
  out.v_y(1) = ref(3, 1) - a1 * (out.v_y(0) - ref(2, 1)) - a0 * e1 - aI * eI1;
  out.v_y(2) = ref(4, 1) - a1 * (out.v_y(1) - ref(3, 1)) - a0 * (out.v_y(0) - ref(2, 1)) - aI * eI2;

  // Brunovsky state expressed by the measured state and v_y, v_y[1].
  out.shifts = reconstruct_shifts(x, out.v_y(0), out.v_y(1), params, h);
  const Eigen::Vector4d ex = out.shifts.col(0) - ref.col(0).head<4>();
  out.v_x = feedback(spec.channels[0], ref(4, 0), ex, integral.e_I(0));

  FlatWindow<double> window;
  window.topRows<4>() = out.shifts;
  window(4, 0) = out.v_x;
  window(4, 1) = out.v_y(2);
  out.input = flat_parameterize(window, params, h).input;
  return out;
}

double AsymmetricFriction::compensation(double velocity) const {
  if (velocity > 0.0) return viscous_pos * velocity + coulomb_pos;
  if (velocity < 0.0) return viscous_neg * velocity - coulomb_neg;
  return 0.0;
}

Input<double> friction_feedforward(double v_Td, double omega_phid,
                                   const FrictionCompensation& c) {
  return {c.trolley.compensation(v_Td), c.drum.compensation(omega_phid)};
}

Eigen::Vector2d desired_actuator_velocities(const ReferenceWindow& ref, const CraneParams& params,
                                            double sample_time) {
  const auto desired = flat_parameterize(ref, params, sample_time);
  const auto original = inverse_transform(desired.state, params);
  return {original.v_T, original.omega_phi};
}

}  // namespace gantry
