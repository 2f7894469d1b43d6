#include "inpipe/dynamics.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "inpipe/errors.hpp"

namespace inpipe {

namespace {

constexpr double kHalfSqrt3 = std::numbers::sqrt3 / 2.0;

void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v))
    throw InvariantError(std::string("robot.") + name, "must be a finite value > 0");
}

}  // namespace

void RobotParams::validate() const {
  require_positive(mass, "mass_kg");
  require_positive(arm_length, "arm_length_m");
  require_positive(wheel_radius, "wheel_radius_m");
  require_positive(iyy, "iyy");
  require_positive(izz, "izz");
  require_positive(gravity, "gravity");
  require_positive(frontal_area, "frontal_area_m2");
  require_positive(water_density, "water_density");
  require_positive(body_radius, "body_radius_m");
  require_positive(f_max, "f_max_n");
  if (!(drag_coeff >= 0.0) || !std::isfinite(drag_coeff))
    throw InvariantError("robot.drag_coeff", "must be >= 0");
}

bool RobotState::finite() const {
  bool ok = std::isfinite(x) && std::isfinite(x_dot) && std::isfinite(phi) &&
            std::isfinite(phi_dot) && std::isfinite(psi) && std::isfinite(psi_dot);
  for (double w : wheel_angle) ok = ok && std::isfinite(w);
  return ok;
}

double drag_force(const RobotParams& p, const Environment& env, double x_dot) {
  const double rel = x_dot - env.flow_velocity;
  return 0.5 * p.water_density * p.drag_coeff * p.frontal_area * rel * std::abs(rel);
}

double axial_accel(const RobotParams& p, const Environment& env, const WheelForces& f,
                   double x_dot) {
  const double traction = f[0] + f[1] + f[2];
  return (traction - p.mass * p.gravity * std::sin(env.inclination) - drag_force(p, env, x_dot)) /
         p.mass;
}

double pitch_accel(const RobotParams& p, const ArmConfig& arms, const WheelForces& f) {
  const double L = p.arm_length;
  return (kHalfSqrt3 * f[2] * L * std::cos(arms.theta[2]) -
          kHalfSqrt3 * f[1] * L * std::cos(arms.theta[1])) /
         p.iyy;
}

double yaw_accel(const RobotParams& p, const Environment& env, const ArmConfig& arms,
                 const WheelForces& f) {
  const double L = p.arm_length;
  const auto& th = arms.theta;
  return (0.5 * f[2] * L * std::cos(th[2]) + kHalfSqrt3 * f[1] * L * std::cos(th[1]) -
          f[0] * L * std::cos(th[0]) -
          p.mass * p.gravity * std::cos(env.inclination) * L * std::sin(th[0])) /
         p.izz;
}

double wheel_rate(const RobotParams& p, double x_dot) { return x_dot / p.wheel_radius; }

RobotState derivative(const RobotParams& p, const Environment& env, const ArmConfig& arms,
                      const WheelForces& f, const RobotState& s) {
  RobotState d;
  d.x = s.x_dot;
  d.x_dot = axial_accel(p, env, f, s.x_dot);
  d.phi = s.phi_dot;
  d.phi_dot = pitch_accel(p, arms, f);
  d.psi = s.psi_dot;
  d.psi_dot = yaw_accel(p, env, arms, f);
  const double w = wheel_rate(p, s.x_dot);
  d.wheel_angle = {w, w, w};
  return d;
}

namespace {

RobotState axpy(const RobotState& s, double h, const RobotState& d) {
  RobotState out;
  out.x = s.x + h * d.x;
  out.x_dot = s.x_dot + h * d.x_dot;
  out.phi = s.phi + h * d.phi;
  out.phi_dot = s.phi_dot + h * d.phi_dot;
  out.psi = s.psi + h * d.psi;
  out.psi_dot = s.psi_dot + h * d.psi_dot;
  for (int i = 0; i < 3; ++i) out.wheel_angle[i] = s.wheel_angle[i] + h * d.wheel_angle[i];
  return out;
}

}  // namespace

RobotState step(const RobotParams& p, const Environment& env, const ArmConfig& arms,
                const WheelForces& f, const RobotState& s, double dt) {
  if (!(dt > 0.0 && dt <= 0.1)) throw InvariantError("dt", "step size must lie in (0, 0.1]");
  const RobotState k1 = derivative(p, env, arms, f, s);
  const RobotState k2 = derivative(p, env, arms, f, axpy(s, dt / 2, k1));
  const RobotState k3 = derivative(p, env, arms, f, axpy(s, dt / 2, k2));
  const RobotState k4 = derivative(p, env, arms, f, axpy(s, dt, k3));
  for (const auto* k : {&k1, &k2, &k3, &k4})
    if (!k->finite()) throw NonFinite("state derivative evaluated to a non-finite value");

  RobotState out;
  auto comb = [dt](double y, double a, double b, double c, double d) {
    return y + dt / 6.0 * (a + 2.0 * b + 2.0 * c + d);
  };
  out.x = comb(s.x, k1.x, k2.x, k3.x, k4.x);
  out.x_dot = comb(s.x_dot, k1.x_dot, k2.x_dot, k3.x_dot, k4.x_dot);
  out.phi = comb(s.phi, k1.phi, k2.phi, k3.phi, k4.phi);
  out.phi_dot = comb(s.phi_dot, k1.phi_dot, k2.phi_dot, k3.phi_dot, k4.phi_dot);
  out.psi = comb(s.psi, k1.psi, k2.psi, k3.psi, k4.psi);
  out.psi_dot = comb(s.psi_dot, k1.psi_dot, k2.psi_dot, k3.psi_dot, k4.psi_dot);
  for (int i = 0; i < 3; ++i)
    out.wheel_angle[i] = comb(s.wheel_angle[i], k1.wheel_angle[i], k2.wheel_angle[i],
                              k3.wheel_angle[i], k4.wheel_angle[i]);
  if (!out.finite()) throw NonFinite("integrated state is non-finite");
  return out;
}

LinearModel linearize(const RobotParams& p, const Environment&, const ArmConfig& arms) {
  // The torque balances do not depend on the attitude, so only the
  // integrator rows of A are populated.
  LinearModel m;
  m.a.setZero();
  m.a(0, 1) = 1.0;
  m.a(2, 3) = 1.0;

  const double L = p.arm_length;
  const auto& th = arms.theta;
  m.b.setZero();
  m.b(1, 1) = -kHalfSqrt3 * L * std::cos(th[1]) / p.iyy;
  m.b(1, 2) = kHalfSqrt3 * L * std::cos(th[2]) / p.iyy;
  m.b(3, 0) = -L * std::cos(th[0]) / p.izz;
  m.b(3, 1) = kHalfSqrt3 * L * std::cos(th[1]) / p.izz;
  m.b(3, 2) = 0.5 * L * std::cos(th[2]) / p.izz;
  return m;
}

AxialLinearization linearize_axial(const RobotParams& p, const Environment& env, double x_dot) {
  const double rel = x_dot - env.flow_velocity;
  AxialLinearization out;
  out.a_v = -p.water_density * p.drag_coeff * p.frontal_area * std::abs(rel) / p.mass;
  out.b.setConstant(1.0 / p.mass);
  return out;
}

WheelForces nominal_forces(const RobotParams& p, const Environment& env, const ArmConfig& arms,
                           double v_ref) {
  const double L = p.arm_length;
  const auto& th = arms.theta;
  Eigen::Matrix3d m;
  m << 1.0, 1.0, 1.0,                                                          //
      0.0, -kHalfSqrt3 * L * std::cos(th[1]), kHalfSqrt3 * L * std::cos(th[2]),  //
      -L * std::cos(th[0]), kHalfSqrt3 * L * std::cos(th[1]), 0.5 * L * std::cos(th[2]);
  const Vec3 rhs(p.mass * p.gravity * std::sin(env.inclination) + drag_force(p, env, v_ref), 0.0,
                 p.mass * p.gravity * std::cos(env.inclination) * L * std::sin(th[0]));
  Eigen::FullPivLU<Eigen::Matrix3d> lu(m);
  if (!lu.isInvertible()) throw GeometryError("wheel force balance is singular for these arms");
  return lu.solve(rhs);
}

ArmConfig arm_angle_from_diameter(const RobotParams& p, double diameter) {
  const double reach = diameter / 2.0 - p.body_radius;
  if (!(reach > 0.0 && reach < p.arm_length))
    throw GeometryError("arms cannot span a pipe of diameter " + std::to_string(diameter) +
                        " m (need 0 < d/2 - body_radius < arm_length)");
  const double theta = std::asin(reach / p.arm_length);
  return ArmConfig{{theta, theta, theta}};
}

}  // namespace inpipe
