#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "inpipe/control.hpp"
#include "inpipe/errors.hpp"

using namespace inpipe;
using Eigen::MatrixXd;

namespace {

constexpr double kPi = std::numbers::pi;

LqrGain default_design() {
  RobotParams p;
  const auto lin = linearize(p, {}, arm_angle_from_diameter(p, 0.3556));
  const Mat4 q = Vec4(10, 1, 10, 1).asDiagonal();
  return lqr_design(lin, q, Eigen::Matrix3d::Identity());
}

}  // namespace

TEST(Lqr, ScalarCare) {
  MatrixXd a = MatrixXd::Zero(1, 1), b = MatrixXd::Ones(1, 1), q = MatrixXd::Ones(1, 1),
           r = MatrixXd::Ones(1, 1);
  const auto sol = solve_lqr(a, b, q, r);
  EXPECT_NEAR(sol.riccati(0, 0), 1.0, 1e-12);
  EXPECT_NEAR(sol.gain(0, 0), 1.0, 1e-12);
  EXPECT_LT(sol.residual, 1e-9);
}

TEST(Lqr, DoubleIntegratorCare) {
  MatrixXd a(2, 2), b(2, 1);
  a << 0, 1, 0, 0;
  b << 0, 1;
  const auto sol = solve_lqr(a, b, MatrixXd::Identity(2, 2), MatrixXd::Ones(1, 1));
  EXPECT_NEAR(sol.gain(0, 0), 1.0, 1e-10);
  EXPECT_NEAR(sol.gain(0, 1), std::sqrt(3.0), 1e-10);
  // P = [[sqrt3, 1], [1, sqrt3]] for this plant.
  EXPECT_NEAR(sol.riccati(0, 0), std::sqrt(3.0), 1e-10);
  EXPECT_NEAR(sol.riccati(0, 1), 1.0, 1e-10);
  EXPECT_LT(sol.residual, 1e-9);
}

TEST(Lqr, EmbeddedDoubleIntegrators) {
  LinearModel plant;
  plant.a.setZero();
  plant.a(0, 1) = 1.0;
  plant.a(2, 3) = 1.0;
  plant.b.setZero();
  plant.b(1, 0) = 1.0;
  plant.b(3, 1) = 1.0;  // third channel has no authority
  const auto gain = lqr_design(plant, Mat4::Identity(), Eigen::Matrix3d::Identity());
  Eigen::Matrix<double, 3, 4> expected;
  expected << 1, std::sqrt(3.0), 0, 0, 0, 0, 1, std::sqrt(3.0), 0, 0, 0, 0;
  EXPECT_LE((gain.k - expected).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Lqr, DefaultPlantClosedLoopIsHurwitz) {
  RobotParams p;
  const auto lin = linearize(p, {}, arm_angle_from_diameter(p, 0.3556));
  for (const Mat4& q : {Mat4(Mat4::Identity()), Mat4(Vec4(10, 1, 10, 1).asDiagonal())}) {
    const auto g = lqr_design(lin, q, Eigen::Matrix3d::Identity());
    const Mat4 acl = lin.a - lin.b * g.k;
    Eigen::EigenSolver<Mat4> es(acl);
    for (int i = 0; i < 4; ++i) EXPECT_LT(es.eigenvalues()[i].real(), 0.0);
    EXPECT_LT(care_residual(lin.a, lin.b, q, Eigen::Matrix3d::Identity(), g.p), 1e-9);
  }
}

TEST(Lqr, RejectsBadWeightsAndUncontrollablePlants) {
  MatrixXd a(2, 2), b(2, 1);
  a << 0, 1, 0, 0;
  b << 0, 1;
  MatrixXd q_bad(2, 2);
  q_bad << 1, 0, 0, -1;
  EXPECT_THROW(solve_lqr(a, b, q_bad, MatrixXd::Ones(1, 1)), InvariantError);
  EXPECT_THROW(solve_lqr(a, b, MatrixXd::Identity(2, 2), MatrixXd::Zero(1, 1)), InvariantError);
  MatrixXd unstable(1, 1), none(1, 1);
  unstable << 1.0;
  none << 0.0;
  EXPECT_THROW(solve_lqr(unstable, none, MatrixXd::Ones(1, 1), MatrixXd::Ones(1, 1)),
               NotStabilizable);
}

TEST(Lqr, SylvesterSolve) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n;
  MatrixXd m(4, 4), c(4, 4);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) m(i, j) = n(rng), c(i, j) = n(rng);
  m -= 5.0 * MatrixXd::Identity(4, 4);
  c = (c + c.transpose()).eval();
  const MatrixXd x = solve_symmetric_sylvester(m, c);
  EXPECT_LE((m * x + x * m.transpose() - c).norm(), 1e-10);
}

TEST(LqrControl, LinearAndClamped) {
  LqrGain g;
  g.k.setZero();
  g.k(0, 0) = 1.0;
  g.k(1, 1) = 2.0;
  g.k(2, 2) = 100.0;
  EXPECT_TRUE(lqr_control(g, Vec4::Zero(), 10.0).isZero(0.0));
  EXPECT_DOUBLE_EQ(lqr_control(g, Vec4(0.1, 0, 0, 0), 10.0)[0], -0.1);
  const Vec4 x(0.01, 0.02, 0.03, 0.0);
  EXPECT_TRUE(lqr_control(g, 2 * x, 10.0).isApprox(2 * lqr_control(g, x, 10.0), 1e-15));
  EXPECT_DOUBLE_EQ(lqr_control(g, Vec4(0, 0, 1, 0), 10.0)[2], -10.0);
  const Vec3 once = lqr_control(g, Vec4(0, 0, 1, 0), 10.0);
  EXPECT_EQ(once, once.cwiseMax(-10.0).cwiseMin(10.0));
}

TEST(WheelSpeed, InverseOfRollingRelation) {
  EXPECT_DOUBLE_EQ(desired_wheel_speed(0.0, 0.05), 0.0);
  EXPECT_NEAR(desired_wheel_speed(0.1, 0.05), 1.0 / kPi, 1e-15);
  EXPECT_DOUBLE_EQ(desired_wheel_speed(0.1, 0.1), desired_wheel_speed(0.1, 0.05) / 2);
}

TEST(Pid, BasicOutputs) {
  PidGains g;
  EXPECT_DOUBLE_EQ(pid_step(g, 0.3, 0.3, {}, 0.01, 10).force, 0.0);
  PidGains p_only{2.0, 0.0, 0.0, 1.0};
  EXPECT_DOUBLE_EQ(pid_step(p_only, 0.5, 0.0, {}, 0.01, 10).force, 1.0);
  EXPECT_DOUBLE_EQ(pid_step(p_only, 50.0, 0.0, {}, 0.01, 10).force, 10.0);
  EXPECT_THROW((PidGains{-1, 0, 0, 1}.validate()), InvariantError);
  EXPECT_THROW((PidGains{1, 0, 0, 0}.validate()), InvariantError);
}

TEST(Pid, IntegratorNeverExceedsLimit) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> e(-5, 5);
  PidGains g{1.0, 3.0, 0.1, 0.4};
  PidState s;
  for (int i = 0; i < 5000; ++i) {
    s = pid_step(g, e(rng), e(rng), s, 0.01, 10).state;
    EXPECT_LE(std::abs(s.integral), g.integral_limit);
  }
}

TEST(Pid, DerivativeActsOnMeasurementOnly) {
  PidGains g{0.0, 0.0, 1.0, 1.0};
  PidState s = pid_step(g, 0.0, 0.0, {}, 0.01, 10).state;
  // A setpoint step with a steady measurement produces no derivative kick.
  EXPECT_DOUBLE_EQ(pid_step(g, 5.0, 0.0, s, 0.01, 10).force, 0.0);
  EXPECT_LT(pid_step(g, 0.0, 1.0, s, 0.01, 10).force, 0.0);
}

// One wheel driving the robot mass alone: omega' = F / (2 pi R m) minus drag.
TEST(Pid, SteadyStateErrorVanishes) {
  RobotParams p;
  const PidGains g;
  const double setpoint = desired_wheel_speed(0.1, p.wheel_radius);
  const double dt = 0.01;
  double v = 0.0;
  PidState s;
  for (int i = 0; i < 1000; ++i) {
    const double omega = v / (2 * kPi * p.wheel_radius);
    const auto out = pid_step(g, setpoint, omega, s, dt, p.f_max);
    s = out.state;
    for (int k = 0; k < 100; ++k) {
      const double drag = 0.5 * p.water_density * p.drag_coeff * p.frontal_area * v * std::abs(v);
      v += (out.force - drag) / p.mass * dt / 100;
    }
  }
  EXPECT_LT(std::abs(setpoint - v / (2 * kPi * p.wheel_radius)), 1e-3);
}

TEST(Phase1, EquilibriumGivesZeroForces) {
  const auto k = default_design();
  RobotParams p;
  RobotState s;
  s.x_dot = 0.1;
  const Vec3 rates = Vec3::Constant(desired_wheel_speed(0.1, p.wheel_radius));
  const auto out = phase1_control(k, PidGains{}, 0.1, s, rates, {}, 0.01, p);
  EXPECT_LE(out.forces.cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Phase1, PureLqrWhenWheelsAtRest) {
  const auto k = default_design();
  RobotParams p;
  RobotState s;
  s.phi = 0.05;
  const auto out = phase1_control(k, PidGains{}, 0.0, s, Vec3::Zero(), {}, 0.01, p);
  EXPECT_TRUE(out.forces.isApprox(lqr_control(k, s.attitude(), p.f_max), 1e-15));
}

TEST(Phase1, ClosedLoopCancelsInitialDeviation) {
  RobotParams p;
  const Environment env{};
  const auto arms = arm_angle_from_diameter(p, 0.3556);
  const auto k = default_design();
  const auto ff = nominal_forces(p, env, arms, 0.1);
  RobotState s;
  s.phi = s.psi = 0.1;
  ControllerState ctrl;
  const double dt = 0.01;
  for (int i = 0; i < 200; ++i) {
    const Vec3 rates = Vec3::Constant(wheel_rate(p, s.x_dot) / (2 * kPi));
    const auto out = phase1_control(k, PidGains{}, 0.1, s, rates, ctrl, dt, p, ff);
    ctrl = out.state;
    for (int j = 0; j < 10; ++j) s = step(p, env, arms, out.forces, s, dt / 10);
  }
  EXPECT_LT(std::abs(s.phi), 0.005);
  EXPECT_LT(std::abs(s.psi), 0.005);
}

TEST(Vva, Allocation) {
  const ConfigurationType left{ConfigKind::Bend, Exit::Left, kPi / 2};
  const ConfigurationType right{ConfigKind::TJunction, Exit::Right, -kPi / 2};
  const ConfigurationType straight{ConfigKind::TJunction, Exit::Straight, 0.0};
  EXPECT_EQ(vva_allocate(straight, 1.0, 0.5).omega_des, Vec3(1, 1, 1));
  EXPECT_EQ(vva_allocate(left, 1.0, 0.5).omega_des, Vec3(1, 1.5, 0.5));
  EXPECT_EQ(vva_allocate(right, 1.0, 0.5).omega_des, Vec3(1, 0.5, 1.5));
  EXPECT_EQ(vva_allocate(left, 0.7, 0.0).omega_des, vva_allocate(straight, 0.7, 0.0).omega_des);
}

// The allocation's force differential must turn the robot the requested way.
TEST(Vva, InducedYawMatchesRequestedSign) {
  RobotParams p;
  const auto arms = arm_angle_from_diameter(p, 0.3556);
  const Environment vertical{kPi / 2, 0.0};
  for (const auto& [exit, sign] : {std::pair{Exit::Left, 1.0}, std::pair{Exit::Right, -1.0}}) {
    const ConfigurationType ct{ConfigKind::TJunction, exit, sign * kPi / 2};
    const Vec3 d = vva_allocate(ct, 1.0, 1.0).omega_des - Vec3::Ones();
    EXPECT_GT(sign * yaw_accel(p, vertical, arms, d), 0.0);
  }
}

TEST(ErrorCheck, Window) {
  EXPECT_TRUE(error_check(kPi / 2, kPi / 2, 0.02));
  EXPECT_FALSE(error_check(0.0, kPi / 2, 0.02));
  EXPECT_TRUE(error_check(kPi / 2 - 0.019, kPi / 2, 0.02));
  EXPECT_FALSE(error_check(kPi / 2 + 0.021, kPi / 2, 0.02));
}

TEST(Supervisor, ModeNamesRoundTrip) {
  for (Mode m : {Mode::StraightCruise, Mode::JunctionSteer, Mode::TerminalStop})
    EXPECT_EQ(mode_from_string(to_string(m)), m);
  EXPECT_FALSE(mode_from_string("drift").has_value());
}

TEST(Supervisor, StopsNearRouteEnd) {
  const RouteMap map({{3.0, 0.3556, 0.0}}, {});
  const PositionEstimate est{3.0 - 0.3556, 1e-6};
  const auto out = supervisor_step({}, SupervisorConfig{}, map, est, 0.3556, 0.0, 0.01);
  EXPECT_EQ(out.state.mode, Mode::TerminalStop);
  EXPECT_EQ(out.command.mode, Mode::TerminalStop);
}

TEST(Supervisor, StaysInCruiseOutsideWindow) {
  const RouteMap map({{3.0, 0.3556, 0.0}, {3.0, 0.3556, 0.0}},
                     {{ConfigKind::Bend, Exit::Left, kPi / 2}});
  SupervisorConfig cfg;
  cfg.d_switch_m = 0.5;
  const auto out = supervisor_step({}, cfg, map, {1.0, 1e-6}, 3.0, 0.0, 0.01);
  EXPECT_EQ(out.state.mode, Mode::StraightCruise);
  EXPECT_FALSE(out.command.maneuver.has_value());
}

TEST(Supervisor, SwitchesIntoSteerAtJunction) {
  const RouteMap map({{3.0, 0.3556, 0.0}, {3.0, 0.3556, 0.0}},
                     {{ConfigKind::Bend, Exit::Left, kPi / 2}});
  SupervisorConfig cfg;
  const auto out = supervisor_step({}, cfg, map, {2.7, 1e-6}, 0.3, 0.0, 0.01);
  EXPECT_EQ(out.state.mode, Mode::JunctionSteer);
  ASSERT_TRUE(out.command.maneuver.has_value());
  EXPECT_EQ(*out.command.maneuver, map.ct_entry(0));
  EXPECT_EQ(out.state.rotation_accum, 0.0);
}

TEST(Supervisor, CompletesRotationAndAdvances) {
  const RouteMap map({{3.0, 0.3556, 0.0}, {3.0, 0.3556, 0.0}},
                     {{ConfigKind::Bend, Exit::Left, kPi / 2}});
  SupervisorState sup{Mode::JunctionSteer, 0, kPi / 2 - 0.015};
  const auto out = supervisor_step(sup, SupervisorConfig{}, map, {2.7, 1e-6}, 0.3, 0.5, 0.01);
  EXPECT_EQ(out.state.mode, Mode::StraightCruise);
  EXPECT_EQ(out.state.junction_index, 1u);
  EXPECT_EQ(out.state.rotation_accum, 0.0);
  EXPECT_TRUE(out.command.junction_completed);
  EXPECT_NEAR(out.command.completed_rotation, kPi / 2 - 0.01, 1e-12);
}

TEST(Supervisor, IgnoresReadingsWhileUnlocalised) {
  const RouteMap map({{3.0, 0.3556, 0.0}}, {});
  const auto out = supervisor_step({}, SupervisorConfig{}, map, {1.5, 0.8}, 0.1, 0.0, 0.01);
  EXPECT_EQ(out.state.mode, Mode::StraightCruise);
}

TEST(Supervisor, RejectsOutlierInconsistentWithEstimate) {
  const RouteMap map({{3.0, 0.3556, 0.0}}, {});
  const auto out = supervisor_step({}, SupervisorConfig{}, map, {1.0, 1e-6}, 0.1, 0.0, 0.01);
  EXPECT_EQ(out.state.mode, Mode::StraightCruise);
}

TEST(SupervisorProperty, JunctionIndexIsMonotoneAndDeterministic) {
  const RouteMap map({{2.0, 0.3556, 0.0}, {2.0, 0.3556, 0.0}, {2.0, 0.3556, 0.0}},
                     {{ConfigKind::Bend, Exit::Left, kPi / 2},
                      {ConfigKind::TJunction, Exit::Right, -kPi / 2}});
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> s(0.0, 6.0), var(0.0, 0.02), z(0.0, 4.0), rate(-1, 1);
  for (int trial = 0; trial < 50; ++trial) {
    SupervisorState sup, replay;
    for (int t = 0; t < 2000; ++t) {
      const PositionEstimate est{s(rng), var(rng)};
      const double zz = z(rng), rr = rate(rng) * 5;
      const auto out = supervisor_step(sup, SupervisorConfig{}, map, est, zz, rr, 0.01);
      const auto again = supervisor_step(replay, SupervisorConfig{}, map, est, zz, rr, 0.01);
      EXPECT_EQ(out.state.mode, again.state.mode);
      EXPECT_EQ(out.state.junction_index, again.state.junction_index);
      EXPECT_GE(out.state.junction_index, sup.junction_index);
      EXPECT_LE(out.state.junction_index, sup.junction_index + 1);
      EXPECT_EQ(out.state.junction_index != sup.junction_index, out.command.junction_completed);
      EXPECT_LE(out.state.junction_index, map.junction_count());
      if (out.state.mode == Mode::StraightCruise) EXPECT_EQ(out.state.rotation_accum, 0.0);
      sup = replay = out.state;
    }
  }
}
