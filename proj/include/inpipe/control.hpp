#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string_view>

#include <Eigen/Dense>

#include "inpipe/dynamics.hpp"
#include "inpipe/pipe_map.hpp"

namespace inpipe {

// ---------------------------------------------------------------------------
// LQR

/// Solution of the continuous algebraic Riccati equation
///   A'P + PA - P B R^-1 B' P + Q = 0
/// together with the optimal gain K = R^-1 B' P.
struct LqrSolution {
  Eigen::MatrixXd gain;
  Eigen::MatrixXd riccati;
  double residual = 0.0;  // Frobenius norm of the CARE residual
  int iterations = 0;
};

/// Newton-Kleinman iteration. The seed gain comes from pole placement on
/// integrator chains when A has that structure, otherwise from the Bass
/// construction. Throws NotStabilizable if no stabilizing seed exists or the
/// residual does not fall below 1e-9; InvariantError on bad Q/R.
LqrSolution solve_lqr(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                      const Eigen::MatrixXd& q, const Eigen::MatrixXd& r);

double care_residual(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const Eigen::MatrixXd& q,
                     const Eigen::MatrixXd& r, const Eigen::MatrixXd& p);

/// Solves M X + X M' = C for X.
Eigen::MatrixXd solve_symmetric_sylvester(const Eigen::MatrixXd& m, const Eigen::MatrixXd& c);

/// Gain for the attitude sub-state, one row per wheel.
struct LqrGain {
  Eigen::Matrix<double, 3, 4> k;
  Mat4 p;  // Riccati solution, kept for Lyapunov checks
};

LqrGain lqr_design(const LinearModel& plant, const Mat4& q, const Eigen::Matrix3d& r);

/// u = -k x, each channel clamped to [-f_max, f_max].
Vec3 lqr_control(const LqrGain& gain, const Vec4& x, double f_max);

// ---------------------------------------------------------------------------
// Wheel speed loops

/// Wheel speed in rev/s that yields body speed v for wheel radius R
/// (v = 2 pi R omega).
double desired_wheel_speed(double v_des, double wheel_radius);

struct PidGains {
  double kp = 2.0;
  double ki = 1.0;
  double kd = 0.0;
  double integral_limit = 1.0;  // bound on |integral of error|, rev

  void validate() const;
};

struct PidState {
  double integral = 0.0;
  double prev_error = 0.0;
  double prev_measured = 0.0;
  double d_filtered = 0.0;
  bool primed = false;
};

struct PidOutput {
  double force = 0.0;
  PidState state;
};

/// Trapezoidal integral with clamping, derivative on measurement through a
/// first-order filter with time constant 10 dt. Output clamped to
/// [-output_limit, output_limit].
PidOutput pid_step(const PidGains& gains, double setpoint, double measured, const PidState& state,
                   double dt, double output_limit);

struct ControllerState {
  std::array<PidState, 3> pid{};
};

struct ControlOutput {
  WheelForces forces = WheelForces::Zero();
  ControllerState state;
};

/// Straight-pipe controller: feedforward + LQR on the attitude + one PID
/// per wheel tracking desired_wheel_speed(v_des). `wheel_rates` in rev/s.
ControlOutput phase1_control(const LqrGain& k, const PidGains& pid, double v_des,
                             const RobotState& state, const Vec3& wheel_rates,
                             const ControllerState& ctrl, double dt, const RobotParams& params,
                             const WheelForces& feedforward = WheelForces::Zero());

struct VvaCommand {
  Vec3 omega_des = Vec3::Zero();  // rev/s per wheel
};

/// Differential wheel-speed allocation for a non-straight configuration.
/// Wheel 1 is the reference wheel; wheels 2 and 3 are sped up and slowed
/// down by steer_gain * base_omega.
VvaCommand vva_allocate(const ConfigurationType& ct, double base_omega, double steer_gain);

/// Junction controller: feedforward + pitch-only LQR (yaw is left free to
/// rotate) + PIDs tracking the VVA wheel speeds.
ControlOutput phase2_control(const LqrGain& k, const PidGains& pid, const VvaCommand& cmd,
                             const RobotState& state, const Vec3& wheel_rates,
                             const ControllerState& ctrl, double dt, const RobotParams& params,
                             const WheelForces& feedforward = WheelForces::Zero());

/// True once the accumulated rotation is within tol of the desired one.
bool error_check(double rotation_accum, double desired_rotation, double tol);

// ---------------------------------------------------------------------------
// Supervisor

enum class Mode { StraightCruise, JunctionSteer, TerminalStop };

std::string_view to_string(Mode mode);
std::optional<Mode> mode_from_string(std::string_view s);

struct SupervisorState {
  Mode mode = Mode::StraightCruise;
  std::size_t junction_index = 0;
  double rotation_accum = 0.0;
};

struct SupervisorConfig {
  double d_switch_m = 0.0;  // <= 0 selects the diameter of the segment ahead
  double d_stop_m = 0.3556;
  double rotation_tol_rad = 0.02;
  /// A sonar reading is trusted only within this distance (plus 3 sigma of
  /// the position estimate) of the range predicted from the estimate.
  double sonar_gate_m = 0.03;
  /// While the position estimate's standard deviation exceeds this, the
  /// supervisor holds its mode.
  double pf_confidence_m = 0.1;
};

struct PositionEstimate {
  double mean = 0.0;      // m
  double variance = 0.0;  // m^2
};

struct ModeCommand {
  Mode mode = Mode::StraightCruise;
  std::optional<ConfigurationType> maneuver;  // set while in JunctionSteer
  bool junction_completed = false;
  double completed_rotation = 0.0;  // rotation at the error-check pass
};

struct SupervisorOutput {
  SupervisorState state;
  ModeCommand command;
};

/// One tick of the phase-switching logic. `psi_rate` is the gyro yaw rate.
SupervisorOutput supervisor_step(const SupervisorState& sup, const SupervisorConfig& cfg,
                                 const RouteMap& map, const PositionEstimate& estimate,
                                 double sonar, double psi_rate, double dt);

}  // namespace inpipe
