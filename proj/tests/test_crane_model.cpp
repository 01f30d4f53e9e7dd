#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "gantry/crane_model.hpp"
#include "gantry/trajectory.hpp"
#include "test_support.hpp"

using namespace gantry;

namespace {

const CraneParams P;

// Residuals of the three equations of motion in trolley coordinates, written out
// directly from the Lagrangian model (not from the implementation).
Eigen::Vector3d eom_residual(const OriginalState<>& s, const Input<>& u, const Vector6<double>& dx,
                             const CraneParams& p) {
  const double st = std::sin(s.theta), ct = std::cos(s.theta);
  const double aT = dx(3), aphi = dx(4), ath = dx(5);
  const double lphi = p.R * s.phi;
  Eigen::Vector3d r;
  r(0) = (p.m_T + p.m_L) * aT - p.m_L * p.R * st * aphi - p.m_L * lphi * ct * ath +
         p.m_L * s.omega_theta * (lphi * s.omega_theta * st - 2.0 * p.R * s.omega_phi * ct) - u.F;
  r(1) = -p.m_L * p.R * st * aT + (p.J + p.m_L * p.R * p.R) * aphi -
         p.m_L * p.R * (lphi * s.omega_theta * s.omega_theta + p.g * ct) - u.M;
  r(2) = -ct * aT + lphi * ath + 2.0 * p.R * s.omega_phi * s.omega_theta + p.g * st;
  return r;
}

}  // namespace

TEST(ContinuousDynamics, EquilibriumIsFixedPoint) {
  OriginalState<> s{0.2, 0.7 / P.R, 0.0, 0.0, 0.0, 0.0};
  const auto dx = continuous_dynamics(s, Input<>{0.0, P.rest_torque()}, P);
  EXPECT_LT(dx.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ContinuousDynamics, UnbalancedDrumSpinsUp) {
  OriginalState<> s{0.2, 0.7 / P.R, 0.0, 0.0, 0.0, 0.0};
  const auto dx = continuous_dynamics(s, Input<>{0.0, 0.0}, P);
  EXPECT_NEAR(dx(4), P.m_L * P.R * P.g / (P.J + P.m_L * P.R * P.R), 1e-9);
  EXPECT_NEAR(dx(3), 0.0, 1e-12);
}

TEST(ContinuousDynamics, ResidualOfEquationsOfMotion) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 500; ++i) {
    const auto s = test::random_original(rng, P);
    const auto u = test::random_input(rng, P);
    const auto dx = continuous_dynamics(s, u, P);
    EXPECT_LT(eom_residual(s, u, dx, P).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(ContinuousDynamics, ResidualWithOtherParameters) {
  CraneParams q;
  q.m_T = 3.2;
  q.m_L = 1.1;
  q.J = 2e-3;
  q.R = 0.04;
  std::mt19937_64 rng(2);
  for (int i = 0; i < 200; ++i) {
    const auto s = test::random_original(rng, q);
    const auto u = test::random_input(rng, q);
    EXPECT_LT(eom_residual(s, u, continuous_dynamics(s, u, q), q).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Transform, RestState) {
  const auto t = transform_to_load_coords(OriginalState<>{0.2, 0.7 / P.R, 0, 0, 0, 0}, P);
  EXPECT_NEAR(t.x_L, 0.2, 1e-15);
  EXPECT_NEAR(t.y_L, 0.7, 1e-15);
  EXPECT_EQ(t.v_Lx, 0.0);
  EXPECT_EQ(t.v_Ly, 0.0);
}

TEST(Transform, PureTrolleyTranslation) {
  const auto t = transform_to_load_coords(OriginalState<>{1.0, 0.5 / P.R, 0, 0.3, 0, 0}, P);
  EXPECT_DOUBLE_EQ(t.v_Lx, 0.3);
  EXPECT_DOUBLE_EQ(t.v_Ly, 0.0);
}

TEST(Transform, InverseOfRest) {
  const auto o = inverse_transform(TransformedState<>{0.2, 0.7, 0, 0, 0, 0}, P);
  EXPECT_NEAR(o.x_T, 0.2, 1e-15);
  EXPECT_NEAR(o.phi, 0.7 / P.R, 1e-12);
  EXPECT_EQ(o.theta, 0.0);
}

TEST(Transform, VerticalHoisting) {
  const auto o = inverse_transform(TransformedState<>{1.0, 0.5, 0.0, -0.1, 0.0, 0.0}, P);
  EXPECT_NEAR(o.omega_phi, -0.1 / P.R, 1e-12);
}

TEST(Transform, RoundTrip) {
  std::mt19937_64 rng(3);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const auto s = test::random_original(rng, P);
    const auto back = inverse_transform(transform_to_load_coords(s, P), P);
    worst = std::max(worst, (back.vector() - s.vector()).cwiseAbs().maxCoeff() /
                                std::max(1.0, s.vector().cwiseAbs().maxCoeff()));
  }
  EXPECT_LT(worst, 1e-12);
}

TEST(Transform, DomainErrors) {
  EXPECT_THROW(inverse_transform(TransformedState<>{0.0, -0.1, 0, 0, 0, 0}, P), DomainError);
  EXPECT_THROW(inverse_transform(TransformedState<>{0.0, 0.5, 0, 0, 1.6, 0}, P), DomainError);
}

TEST(TransformedDynamics, Equilibrium) {
  const auto f = transformed_dynamics(TransformedState<>{0.2, 0.7, 0, 0, 0, 0},
                                      Input<>{0.0, P.rest_torque()}, P);
  EXPECT_LT(f.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(TransformedDynamics, ChainRuleAgainstFiniteDifference) {
  std::mt19937_64 rng(4);
  const double h = 1e-7;
  for (int i = 0; i < 200; ++i) {
    const auto s = test::random_original(rng, P);
    const auto u = test::random_input(rng, P);
    const Vector6<double> f = continuous_dynamics(s, u, P);
    const auto plus = transform_to_load_coords(OriginalState<>::from_vector(s.vector() + h * f), P);
    const auto minus = transform_to_load_coords(OriginalState<>::from_vector(s.vector() - h * f), P);
    const Vector6<double> fd = (plus.vector() - minus.vector()) / (2.0 * h);
    const auto g = transformed_dynamics(transform_to_load_coords(s, P), u, P);
    EXPECT_LT((fd - g).cwiseAbs().maxCoeff(), 1e-6 * std::max(1.0, g.cwiseAbs().maxCoeff()));
  }
}

TEST(TransformedDynamics, PendulumConstraint) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 500; ++i) {
    auto s = test::random_transformed(rng, P);
    if (i == 0) s.theta = 0.3;
    if (std::abs(std::sin(s.theta)) < 1e-3) continue;
    const auto f = transformed_dynamics(s, test::random_input(rng, P), P);
    EXPECT_NEAR(f(3), P.g - f(2) / std::tan(s.theta), 1e-10 * std::max(1.0, std::abs(f(2))));
  }
}

TEST(EulerStep, EquilibriumFixedPoint) {
  const TransformedState<> eq{0.2, 0.7, 0, 0, 0, 0};
  const auto next = euler_step(eq, Input<>{0.0, P.rest_torque()}, P, 0.01);
  EXPECT_LT((next.vector() - eq.vector()).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(EulerStep, KinematicRows) {
  const TransformedState<> s{0.2, 0.7, 0.1, 0, 0, 0};
  const auto next = euler_step(s, Input<>{0.0, P.rest_torque()}, P, 0.01);
  EXPECT_NEAR(next.x_L, 0.201, 1e-15);
  const auto f = transformed_dynamics(s, Input<>{0.0, P.rest_torque()}, P);
  EXPECT_NEAR(next.v_Lx, 0.1 + 0.01 * f(2), 1e-15);
  EXPECT_NEAR(next.y_L, 0.7, 1e-15);
}

TEST(EulerStep, CommutesWithInputTransformation) {
  std::mt19937_64 rng(6);
  for (int i = 0; i < 1000; ++i) {
    auto s = test::random_transformed(rng, P);
    if (std::abs(s.theta) < 1e-3) s.theta = 0.05;
    const auto u = test::random_input(rng, P);
    const auto a = euler_step(s, u, P, 0.01);
    const auto b = triangular_euler_step(s, to_triangular_input(s, u, P), P, 0.01);
    EXPECT_LT((a.vector() - b.vector()).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(FlatParameterize, RestWindow) {
  FlatWindow<double> w;
  for (int i = 0; i < 5; ++i) w.row(i) << 0.2, 0.7;
  const auto fp = flat_parameterize(w, P, 0.01);
  EXPECT_NEAR(fp.state.x_L, 0.2, 1e-15);
  EXPECT_NEAR(fp.state.y_L, 0.7, 1e-15);
  EXPECT_NEAR(fp.state.v_Lx, 0.0, 1e-15);
  EXPECT_NEAR(fp.state.theta, 0.0, 1e-15);
  EXPECT_NEAR(fp.input.F, 0.0, 1e-12);
  EXPECT_NEAR(fp.input.M, P.rest_torque(), 1e-12);
}

// The inputs come from fourth differences of rounded samples, so their error floor
// grows like eps / T_s^4: about 7e-9 at 10 ms, 4e-10 at 20 ms.
TEST(FlatParameterize, SimulateThenInvert) {
  std::mt19937_64 rng(7);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const auto roll = test::random_rollout(rng, P, 0.02);
    const auto fp = flat_parameterize(roll.window, P, 0.02);
    worst = std::max(worst, (fp.state.vector() - roll.x0.vector()).cwiseAbs().maxCoeff());
    worst = std::max(worst, (fp.input.vector() - roll.u0.vector()).cwiseAbs().maxCoeff());
  }
  EXPECT_LT(worst, 1e-9);
}

TEST(FlatParameterize, SimulateThenInvertAt10ms) {
  std::mt19937_64 rng(8);
  double state = 0.0, input = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const auto roll = test::random_rollout(rng, P, 0.01);
    const auto fp = flat_parameterize(roll.window, P, 0.01);
    state = std::max(state, (fp.state.vector() - roll.x0.vector()).cwiseAbs().maxCoeff());
    input = std::max(input, (fp.input.vector() - roll.u0.vector()).cwiseAbs().maxCoeff());
  }
  EXPECT_LT(state, 1e-9);
  EXPECT_LT(input, 5e-8);
}

TEST(FlatParameterize, ShiftCompatibility) {
  const auto ref = polynomial_reference({0.2, 0.7}, {1.0, 0.5}, 1.7, 0.01);
  for (int k = 0; k + 5 < ref.size(); ++k) {
    const auto a = flat_parameterize(ref.window(k), P, 0.01);
    const auto b = flat_parameterize(ref.window(k + 1), P, 0.01);
    const auto next = euler_step(a.state, a.input, P, 0.01);
    ASSERT_LT((next.vector() - b.state.vector()).cwiseAbs().maxCoeff(), 1e-9) << "k=" << k;
  }
}

TEST(FlatParameterize, BenchmarkMidTransition) {
  const auto ref = polynomial_reference({0.2, 0.7}, {1.0, 0.5}, 1.7, 0.01);
  const auto fp = flat_parameterize(ref.window(85), P, 0.01);
  EXPECT_TRUE(std::isfinite(fp.input.F));
  EXPECT_LT(std::abs(fp.state.theta), M_PI / 2);
  EXPECT_LT(std::abs(fp.input.M), 0.2);
}

TEST(FlatParameterize, FreeFallIsSingular) {
  const double h = 0.01;
  FlatWindow<double> w;
  for (int i = 0; i < 5; ++i) w.row(i) << 0.2, 0.7 + 0.5 * P.g * (i * h) * (i * h);
  EXPECT_THROW(flat_parameterize(w, P, h), SingularityError);
}

TEST(CraneParams, Invariants) {
  CraneParams q;
  q.m_L = 0.0;
  EXPECT_THROW(q.validate(), ValidationError);
  q = CraneParams{};
  q.r_vT = -1.0;
  EXPECT_THROW(q.validate(), ValidationError);
  EXPECT_NO_THROW(CraneParams{}.validate());
}
