#include <algorithm>
#include <cmath>
#include <complex>
#include <random>

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include "gantry/controllers.hpp"
#include "gantry/crane_model.hpp"
#include "gantry/simulation.hpp"
#include "gantry/trajectory.hpp"

using namespace gantry;

namespace {

const CraneParams P;
constexpr double Ts = 0.01;

ReferenceTrajectory benchmark(double T = 1.7) {
  return polynomial_reference({0.2, 0.7}, {1.0, 0.5}, T, Ts);
}

// Rest state at the reference start, moved by an offset in the flat output. Offsets
// stay below g T_s^2 so that fast error dynamics keep the rope taut.
TransformedState<> perturbed_start(const ReferenceTrajectory& ref, Eigen::Vector2d offset,
                                   double velocity = 0.0) {
  TransformedState<> x = flat_parameterize(ref.window(0), P, Ts).state;
  x.x_L += offset(0);
  x.y_L += offset(1);
  x.v_Lx += velocity;
  return x;
}

std::vector<double> sorted_real(std::vector<std::complex<double>> v) {
  std::vector<double> out;
  std::sort(v.begin(), v.end(), [](auto a, auto b) {
    return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
  });
  for (auto c : v) {
    out.push_back(c.real());
    out.push_back(c.imag());
  }
  return out;
}

struct Log {
  std::vector<Eigen::Vector2d> y, yd;
  std::vector<Eigen::Vector2d> v;        // dynamic: y[4]; quasi-static: (x_L[4], y_L[2])
};

Log run_dynamic(const ReferenceTrajectory& ref, const ErrorDynamicsSpec& spec,
                TransformedState<> x, int steps) {
  Log log;
  DynamicControllerState z = DynamicControllerState::from_reference(ref.window(0));
  for (int k = 0; k < steps; ++k) {
    const auto out = dynamic_feedback_step(x, z, ref.window(k), spec, P, Ts);
    log.y.push_back(x.flat_output());
    log.yd.push_back(ref.at(k));
    log.v.push_back(out.v);
    x = euler_step(x, out.input, P, Ts);
    z = out.next;
  }
  return log;
}

Log run_quasi_static(const ReferenceTrajectory& ref, const ErrorDynamicsSpec& spec,
                     TransformedState<> x, int steps) {
  Log log;
  for (int k = 0; k < steps; ++k) {
    const auto out = quasi_static_feedback(x, ref.window(k), spec, P, Ts);
    log.y.push_back(x.flat_output());
    log.yd.push_back(ref.at(k));
    log.v.push_back({out.v_x, out.v_y(0)});
    x = euler_step(x, out.input, P, Ts);
  }
  return log;
}

double recursion_residual(const Log& log, int channel, const std::vector<double>& a) {
  const int n = static_cast<int>(a.size());
  double worst = 0.0;
  for (std::size_t k = 0; k + n < log.y.size(); ++k) {
    double r = log.y[k + n](channel) - log.yd[k + n](channel);
    for (int i = 0; i < n; ++i) r += a[i] * (log.y[k + i](channel) - log.yd[k + i](channel));
    worst = std::max(worst, std::abs(r));
  }
  return worst;
}

}  // namespace

TEST(PolePlace, DeadbeatCoefficients) {
  const auto spec = uniform_spec(0.0, {4, 4});
  for (const auto& ch : spec.channels) {
    ASSERT_EQ(ch.order(), 4);
    for (double c : ch.coefficients) EXPECT_EQ(c, 0.0);
  }
}

TEST(PolePlace, DoubleRootAtHalf) {
  const std::vector<std::complex<double>> r{0.5, 0.5};
  const auto ch = place_channel(r);
  ASSERT_EQ(ch.order(), 2);
  EXPECT_DOUBLE_EQ(ch.coefficients[1], -1.0);
  EXPECT_DOUBLE_EQ(ch.coefficients[0], 0.25);
}

TEST(PolePlace, CompanionEigenvaluesMatchRoots) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> mag(0.05, 0.95), ang(0.1, 3.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::complex<double>> roots;
    const auto pair = std::polar(mag(rng), ang(rng));
    roots.push_back(pair);
    roots.push_back(std::conj(pair));
    roots.emplace_back(mag(rng) * 2.0 - 1.0, 0.0);
    roots.emplace_back(mag(rng) - 0.99, 0.0);
    const auto ch = place_channel(roots);
    Eigen::EigenSolver<Eigen::MatrixXd> es(companion_matrix(ch));
    std::vector<std::complex<double>> eig(es.eigenvalues().begin(), es.eigenvalues().end());
    const auto a = sorted_real(roots), b = sorted_real(eig);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-10);
  }
}

TEST(PolePlace, IntegralCompanionEigenvalues) {
  const std::vector<std::complex<double>> roots{0.6, 0.65, 0.7, 0.75, 0.8};
  const auto ch = place_channel_with_integral(roots, Ts);
  ASSERT_EQ(ch.order(), 4);
  EXPECT_TRUE(ch.integral);
  Eigen::EigenSolver<Eigen::MatrixXd> es(integral_companion_matrix(ch, Ts));
  std::vector<std::complex<double>> eig(es.eigenvalues().begin(), es.eigenvalues().end());
  const auto a = sorted_real(roots), b = sorted_real(eig);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-9);
}

TEST(PolePlace, RejectsUnstableAndUnpairedRoots) {
  const std::vector<std::complex<double>> outside{1.0, 0.2};
  EXPECT_THROW(place_channel(outside), ValidationError);
  const std::vector<std::complex<double>> unpaired{{0.2, 0.3}, 0.1};
  EXPECT_THROW(place_channel(unpaired), ValidationError);
}

TEST(DynamicFeedback, RestFixedPoint) {
  ReferenceWindow w;
  for (int i = 0; i < 5; ++i) w.row(i) << 0.2, 0.7;
  const TransformedState<> x{0.2, 0.7, 0, 0, 0, 0};
  const auto out = dynamic_feedback_step(x, {0.7, 0.7}, w, uniform_spec(0.5, {4, 4}), P, Ts);
  EXPECT_NEAR(out.input.F, 0.0, 1e-9);
  EXPECT_NEAR(out.input.M, P.rest_torque(), 1e-9);
  EXPECT_NEAR(out.next.z1, 0.7, 1e-12);
  EXPECT_NEAR(out.next.z2, 0.7, 1e-12);
}

TEST(DynamicFeedback, DeadbeatAfterFourSteps) {
  const auto ref = benchmark();
  const auto log = run_dynamic(ref, uniform_spec(0.0, {4, 4}), perturbed_start(ref, {3e-4, -2e-4}), 60);
  EXPECT_GT((log.y[0] - log.yd[0]).cwiseAbs().maxCoeff(), 1e-4);
  for (std::size_t k = 4; k < log.y.size(); ++k) {
    EXPECT_LT((log.y[k] - log.yd[k]).cwiseAbs().maxCoeff(), 1e-9) << "k=" << k;
  }
}

TEST(DynamicFeedback, ExactLinearizationAndRecursion) {
  const auto ref = benchmark();
  const auto spec = uniform_spec(0.5, {4, 4});
  const auto log = run_dynamic(ref, spec, perturbed_start(ref, {2e-4, 1e-4}), 200);
  double worst = 0.0;
  for (std::size_t k = 0; k + 4 < log.y.size(); ++k) {
    worst = std::max(worst, (log.y[k + 4] - log.v[k]).cwiseAbs().maxCoeff());
  }
  EXPECT_LT(worst, 1e-9);
  EXPECT_LT(recursion_residual(log, 0, spec.channels[0].coefficients), 1e-9);
  EXPECT_LT(recursion_residual(log, 1, spec.channels[1].coefficients), 1e-9);
}

TEST(QuasiStatic, RestFixedPoint) {
  ReferenceWindow w;
  for (int i = 0; i < 5; ++i) w.row(i) << 0.2, 0.7;
  const auto u = quasi_static_feedback_step({0.2, 0.7, 0, 0, 0, 0}, w, uniform_spec(0.5, {4, 2}), P, Ts);
  EXPECT_NEAR(u.F, 0.0, 1e-9);
  EXPECT_NEAR(u.M, P.rest_torque(), 1e-9);
}

TEST(QuasiStatic, DeadbeatAfterFourAndTwoSteps) {
  const auto ref = benchmark();
  const auto log = run_quasi_static(ref, uniform_spec(0.0, {4, 2}), perturbed_start(ref, {3e-4, -2e-4}), 60);
  for (std::size_t k = 0; k < log.y.size(); ++k) {
    const Eigen::Vector2d e = log.y[k] - log.yd[k];
    if (k >= 4) EXPECT_LT(std::abs(e(0)), 1e-9) << "k=" << k;
    if (k >= 2) EXPECT_LT(std::abs(e(1)), 1e-9) << "k=" << k;
  }
  EXPECT_GT(std::abs(log.y[3](0) - log.yd[3](0)), 1e-6);
}

TEST(QuasiStatic, ExactLinearizationAndRecursion) {
  const auto ref = benchmark();
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> r(-0.9, 0.9);
  for (int trial = 0; trial < 5; ++trial) {
    const auto pair = std::polar(0.3 + 0.5 * std::abs(r(rng)), 0.2 + std::abs(r(rng)));
    std::array<std::vector<std::complex<double>>, 2> roots{
        std::vector<std::complex<double>>{pair, std::conj(pair), r(rng), r(rng)},
        std::vector<std::complex<double>>{r(rng), r(rng)}};
    const auto spec = pole_place(roots);
    const auto log = run_quasi_static(ref, spec, perturbed_start(ref, {2e-4, 1e-4}), 200);
    double wx = 0.0, wy = 0.0;
    for (std::size_t k = 0; k + 4 < log.y.size(); ++k) {
      wx = std::max(wx, std::abs(log.y[k + 4](0) - log.v[k](0)));
      wy = std::max(wy, std::abs(log.y[k + 2](1) - log.v[k](1)));
    }
    EXPECT_LT(wx, 1e-9);
    EXPECT_LT(wy, 1e-9);
    EXPECT_LT(recursion_residual(log, 0, spec.channels[0].coefficients), 1e-9);
    EXPECT_LT(recursion_residual(log, 1, spec.channels[1].coefficients), 1e-9);
  }
}

TEST(QuasiStatic, StatelessAndDeterministic) {
  const auto ref = benchmark();
  const auto x = perturbed_start(ref, {0.001, 0.002}, 0.05);
  const auto spec = uniform_spec(0.5, {4, 2});
  const auto a = quasi_static_feedback_step(x, ref.window(40), spec, P, Ts);
  const auto b = quasi_static_feedback_step(x, ref.window(40), spec, P, Ts);
  EXPECT_EQ(a.F, b.F);
  EXPECT_EQ(a.M, b.M);
}

TEST(QuasiStatic, AgreesWithDynamicFeedbackOnBenchmark) {
  const auto ref = benchmark();
  const auto x0 = perturbed_start(ref, {1e-4, -1e-4});
  const int n = ref.size() + 50;
  const auto d = run_dynamic(ref, uniform_spec(0.5, {4, 4}), x0, n);
  const auto q = run_quasi_static(ref, uniform_spec(0.5, {4, 2}), x0, n);
  double worst = 0.0;
  for (int k = 0; k < n; ++k) worst = std::max(worst, (d.y[k] - q.y[k]).norm());
  EXPECT_LT(worst, 1e-3);
}

TEST(Integral, UpdateAndFreeze) {
  IntegralState s;
  s = integral_update(s, {0.01, 0.01}, true, 0.01);
  EXPECT_DOUBLE_EQ(s.e_I(0), 1e-4);
  const auto frozen = integral_update(s, {0.5, -0.3}, false, 0.01);
  EXPECT_EQ(frozen.e_I, s.e_I);
}

TEST(FrictionFeedforward, ZeroVelocity) {
  const auto u = friction_feedforward(0.0, 0.0, FrictionCompensation{
      AsymmetricFriction::symmetric(2.0, 1.0), AsymmetricFriction::symmetric(0.01, 0.02)});
  EXPECT_EQ(u.F, 0.0);
  EXPECT_EQ(u.M, 0.0);
}

TEST(FrictionFeedforward, LinearPlusCoulomb) {
  const FrictionCompensation c{AsymmetricFriction::symmetric(2.0, 1.0), {}};
  EXPECT_DOUBLE_EQ(friction_feedforward(0.5, 0.0, c).F, 2.0);
}

TEST(FrictionFeedforward, AsymmetricCoefficientsBySign) {
  FrictionCompensation c;
  c.trolley = {2.0, 3.0, 1.0, 0.5};
  c.drum = {0.01, 0.02, 0.03, 0.04};
  EXPECT_DOUBLE_EQ(friction_feedforward(0.5, 0.0, c).F, 2.0 * 0.5 + 1.0);
  EXPECT_DOUBLE_EQ(friction_feedforward(-0.5, 0.0, c).F, -3.0 * 0.5 - 0.5);
  EXPECT_DOUBLE_EQ(friction_feedforward(0.0, 2.0, c).M, 0.01 * 2.0 + 0.03);
  EXPECT_DOUBLE_EQ(friction_feedforward(0.0, -2.0, c).M, -0.02 * 2.0 - 0.04);
}
