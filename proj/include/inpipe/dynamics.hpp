#pragma once

#include <array>

#include <Eigen/Dense>

namespace inpipe {

using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat4 = Eigen::Matrix4d;
using Mat43 = Eigen::Matrix<double, 4, 3>;

/// Physical parameters of the wall-press robot. The defaults describe a
/// robot sized for a 14-inch pipe.
struct RobotParams {
  double mass = 3.0;             // kg
  double arm_length = 0.2;       // m
  double wheel_radius = 0.05;    // m
  double iyy = 0.05;             // kg m^2
  double izz = 0.05;             // kg m^2
  double gravity = 9.81;         // m/s^2
  double drag_coeff = 1.0;
  double frontal_area = 0.01;    // m^2
  double water_density = 1000.0; // kg/m^3
  double body_radius = 0.12;     // m, hub radius the arms pivot on
  double f_max = 10.0;           // N, per-wheel actuator limit

  /// Throws InvariantError naming the offending field.
  void validate() const;
};

struct Environment {
  double inclination = 0.0;    // rad
  double flow_velocity = 0.0;  // m/s along the pipe axis
};

struct RobotState {
  double x = 0.0;  // m, progress along the pipe axis
  double x_dot = 0.0;
  double phi = 0.0;  // rad, rotation about y
  double phi_dot = 0.0;
  double psi = 0.0;  // rad, rotation about z
  double psi_dot = 0.0;
  std::array<double, 3> wheel_angle{};  // rad

  /// The stabilizing sub-state [phi, phi_dot, psi, psi_dot].
  Vec4 attitude() const { return {phi, phi_dot, psi, psi_dot}; }
  bool finite() const;

  bool operator==(const RobotState&) const = default;
};

/// Traction force per wheel, N.
using WheelForces = Vec3;

struct ArmConfig {
  std::array<double, 3> theta{};  // rad, each in (0, pi/2)
};

/// F_d = 1/2 rho C_d A (v - v_flow)|v - v_flow|, opposing relative motion.
double drag_force(const RobotParams& params, const Environment& env, double x_dot);

/// Axial translation balance.
double axial_accel(const RobotParams& params, const Environment& env, const WheelForces& f,
                   double x_dot);

/// Torque balance about y through the hub centre.
double pitch_accel(const RobotParams& params, const ArmConfig& arms, const WheelForces& f);

/// Torque balance about z, including the gravity moment carried by arm 1.
double yaw_accel(const RobotParams& params, const Environment& env, const ArmConfig& arms,
                 const WheelForces& f);

/// Wheel angular rate in rad/s. Wheels roll without slip at the axial speed.
double wheel_rate(const RobotParams& params, double x_dot);

/// Time derivative of the full state at fixed forces.
RobotState derivative(const RobotParams& params, const Environment& env, const ArmConfig& arms,
                      const WheelForces& f, const RobotState& s);

/// One classical RK4 step. dt must lie in (0, 0.1]. Throws NonFinite.
RobotState step(const RobotParams& params, const Environment& env, const ArmConfig& arms,
                const WheelForces& f, const RobotState& state, double dt);

struct LinearModel {
  Mat4 a;
  Mat43 b;
};

/// Jacobians of [phi, phi_dot, psi, psi_dot] dynamics about the upright
/// equilibrium, w.r.t. state and wheel forces.
LinearModel linearize(const RobotParams& params, const Environment& env, const ArmConfig& arms);

/// d(x_ddot)/d(x_dot) and d(x_ddot)/dF at the given axial speed.
struct AxialLinearization {
  double a_v;
  Eigen::RowVector3d b;
};
AxialLinearization linearize_axial(const RobotParams& params, const Environment& env,
                                   double x_dot);

/// Wheel forces that hold the robot at zero pitch and yaw acceleration while
/// cruising at `v_ref`: the operating point the LQR regulates around.
/// Throws GeometryError if the balance is singular.
WheelForces nominal_forces(const RobotParams& params, const Environment& env,
                           const ArmConfig& arms, double v_ref);

/// Symmetric arm angle from a passive-spring fit to the pipe:
/// theta = asin((d/2 - body_radius) / L). Throws GeometryError when the arms
/// cannot reach the wall inside the open interval (0, pi/2).
ArmConfig arm_angle_from_diameter(const RobotParams& params, double diameter);

}  // namespace inpipe
