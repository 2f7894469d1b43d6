#include "inpipe/control.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "inpipe/errors.hpp"

namespace inpipe {

using Eigen::MatrixXd;

namespace {

constexpr double kCareTolerance = 1e-9;
constexpr int kMaxNewtonIterations = 100;

bool hurwitz(const MatrixXd& m) {
  Eigen::EigenSolver<MatrixXd> es(m, false);
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
    if (!(es.eigenvalues()[i].real() < 0.0)) return false;
  return true;
}

// Pole placement for plants made of (position, velocity) pairs where
// position' = velocity and only the velocity rows are actuated.
std::optional<MatrixXd> integrator_chain_seed(const MatrixXd& a, const MatrixXd& b) {
  const Eigen::Index n = a.rows();
  if (n % 2 != 0) return std::nullopt;
  std::vector<Eigen::Index> pos, vel;
  std::vector<bool> used(static_cast<std::size_t>(n), false);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index one = -1;
    bool pure = true;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (a(i, j) == 1.0 && one < 0) {
        one = j;
      } else if (a(i, j) != 0.0) {
        pure = false;
      }
    }
    if (!pure || one < 0) continue;
    if (!a.row(one).isZero(0.0) || !b.row(i).isZero(0.0)) continue;
    pos.push_back(i);
    vel.push_back(one);
  }
  if (static_cast<Eigen::Index>(pos.size()) * 2 != n) return std::nullopt;
  for (std::size_t c = 0; c < pos.size(); ++c) {
    if (used[pos[c]] || used[vel[c]]) return std::nullopt;
    used[pos[c]] = used[vel[c]] = true;
  }

  const auto p = static_cast<Eigen::Index>(pos.size());
  MatrixXd bv(p, b.cols());
  for (Eigen::Index c = 0; c < p; ++c) bv.row(c) = b.row(vel[c]);
  Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(bv);
  if (cod.rank() < p) return std::nullopt;

  // Critically damped pair of poles at -2 for every chain.
  constexpr double kOmega = 2.0;
  MatrixXd gains = MatrixXd::Zero(p, n);
  for (Eigen::Index c = 0; c < p; ++c) {
    gains(c, pos[c]) = kOmega * kOmega;
    gains(c, vel[c]) = 2.0 * kOmega;
  }
  return MatrixXd(cod.pseudoInverse() * gains);
}

// Bass: K = B' W^-1 with (A + beta I) W + W (A + beta I)' = 2 B B'.
std::optional<MatrixXd> bass_seed(const MatrixXd& a, const MatrixXd& b) {
  const Eigen::Index n = a.rows();
  const double beta = a.norm() + 1.0;
  const MatrixXd shifted = a + beta * MatrixXd::Identity(n, n);
  const MatrixXd w = solve_symmetric_sylvester(shifted, 2.0 * b * b.transpose());
  Eigen::LDLT<MatrixXd> ldlt(w);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) return std::nullopt;
  return MatrixXd(b.transpose() * ldlt.solve(MatrixXd::Identity(n, n)));
}

}  // namespace

MatrixXd solve_symmetric_sylvester(const MatrixXd& m, const MatrixXd& c) {
  const Eigen::Index n = m.rows();
  const MatrixXd eye = MatrixXd::Identity(n, n);
  // vec(M X) = (I kron M) vec X, vec(X M') = (M kron I) vec X.
  MatrixXd op = MatrixXd::Zero(n * n, n * n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      op.block(i * n, j * n, n, n) += eye(i, j) * m;
      op.block(i * n, j * n, n, n) += m(i, j) * eye;
    }
  const Eigen::VectorXd rhs = Eigen::Map<const Eigen::VectorXd>(c.data(), n * n);
  const Eigen::VectorXd x = op.fullPivLu().solve(rhs);
  MatrixXd out = Eigen::Map<const MatrixXd>(x.data(), n, n);
  return out;
}

double care_residual(const MatrixXd& a, const MatrixXd& b, const MatrixXd& q, const MatrixXd& r,
                     const MatrixXd& p) {
  const MatrixXd r_inv_bt = r.ldlt().solve(b.transpose());
  const MatrixXd res = a.transpose() * p + p * a - p * b * r_inv_bt * p + q;
  return res.norm();
}

LqrSolution solve_lqr(const MatrixXd& a, const MatrixXd& b, const MatrixXd& q, const MatrixXd& r) {
  const Eigen::Index n = a.rows();
  if (a.cols() != n || b.rows() != n || q.rows() != n || q.cols() != n ||
      r.rows() != b.cols() || r.cols() != b.cols())
    throw InvariantError("lqr", "matrix dimensions do not agree");
  if (!(q - q.transpose()).isZero(1e-12))
    throw InvariantError("lqr.q", "must be symmetric");
  Eigen::SelfAdjointEigenSolver<MatrixXd> q_eig(q);
  if (q_eig.eigenvalues().minCoeff() < -1e-12) throw InvariantError("lqr.q", "must be PSD");
  Eigen::LLT<MatrixXd> r_llt(r);
  if (r_llt.info() != Eigen::Success) throw InvariantError("lqr.r", "must be positive definite");

  MatrixXd k;
  if (hurwitz(a)) {
    k = MatrixXd::Zero(b.cols(), n);
  } else {
    auto seed = integrator_chain_seed(a, b);
    if (!seed || !hurwitz(a - b * *seed)) seed = bass_seed(a, b);
    if (!seed || !hurwitz(a - b * *seed))
      throw NotStabilizable("no stabilizing seed gain found; (A, B) is not stabilizable");
    k = *seed;
  }

  LqrSolution sol;
  for (int it = 1; it <= kMaxNewtonIterations; ++it) {
    const MatrixXd closed = a - b * k;
    const MatrixXd weight = q + k.transpose() * r * k;
    MatrixXd p = solve_symmetric_sylvester(closed.transpose(), -weight);
    p = 0.5 * (p + p.transpose());
    k = r_llt.solve(b.transpose() * p);
    sol.iterations = it;
    sol.riccati = p;
    sol.residual = care_residual(a, b, q, r, p);
    if (!std::isfinite(sol.residual)) break;
    if (sol.residual < kCareTolerance) break;
  }
  sol.gain = k;
  if (!(sol.residual < kCareTolerance))
    throw NotStabilizable("Riccati iteration did not converge (residual " +
                          std::to_string(sol.residual) + ")");
  if (!hurwitz(a - b * k)) throw NotStabilizable("closed loop is not Hurwitz");
  return sol;
}

LqrGain lqr_design(const LinearModel& plant, const Mat4& q, const Eigen::Matrix3d& r) {
  const LqrSolution sol = solve_lqr(plant.a, plant.b, q, r);
  LqrGain g;
  g.k = sol.gain;
  g.p = sol.riccati;
  return g;
}

Vec3 lqr_control(const LqrGain& gain, const Vec4& x, double f_max) {
  const Vec3 u = -gain.k * x;
  return u.cwiseMax(-f_max).cwiseMin(f_max);
}

double desired_wheel_speed(double v_des, double wheel_radius) {
  return v_des / (2.0 * std::numbers::pi * wheel_radius);
}

void PidGains::validate() const {
  if (!(kp >= 0.0)) throw InvariantError("control.pid.kp", "must be >= 0");
  if (!(ki >= 0.0)) throw InvariantError("control.pid.ki", "must be >= 0");
  if (!(kd >= 0.0)) throw InvariantError("control.pid.kd", "must be >= 0");
  if (!(integral_limit > 0.0))
    throw InvariantError("control.pid.integral_limit", "must be > 0");
}

PidOutput pid_step(const PidGains& g, double setpoint, double measured, const PidState& state,
                   double dt, double output_limit) {
  PidOutput out;
  PidState& s = out.state;
  s = state;
  const double e = setpoint - measured;
  if (!s.primed) {
    s.integral += e * dt;
    s.d_filtered = 0.0;
  } else {
    s.integral += 0.5 * (e + s.prev_error) * dt;
    const double raw = -(measured - s.prev_measured) / dt;
    const double tau = 10.0 * dt;
    s.d_filtered += dt / (tau + dt) * (raw - s.d_filtered);
  }
  s.integral = std::clamp(s.integral, -g.integral_limit, g.integral_limit);
  s.prev_error = e;
  s.prev_measured = measured;
  s.primed = true;
  const double u = g.kp * e + g.ki * s.integral + g.kd * s.d_filtered;
  out.force = std::clamp(u, -output_limit, output_limit);
  return out;
}

namespace {

ControlOutput track_wheels(const Vec3& lqr_term, const PidGains& pid, const Vec3& setpoints,
                           const Vec3& wheel_rates, const ControllerState& ctrl, double dt,
                           const RobotParams& params, const WheelForces& feedforward) {
  ControlOutput out;
  for (int i = 0; i < 3; ++i) {
    const PidOutput p =
        pid_step(pid, setpoints[i], wheel_rates[i], ctrl.pid[i], dt, params.f_max);
    out.state.pid[i] = p.state;
    out.forces[i] = std::clamp(feedforward[i] + lqr_term[i] + p.force, -params.f_max, params.f_max);
  }
  return out;
}

}  // namespace

ControlOutput phase1_control(const LqrGain& k, const PidGains& pid, double v_des,
                             const RobotState& state, const Vec3& wheel_rates,
                             const ControllerState& ctrl, double dt, const RobotParams& params,
                             const WheelForces& feedforward) {
  const Vec3 stabilize = lqr_control(k, state.attitude(), params.f_max);
  const Vec3 setpoints = Vec3::Constant(desired_wheel_speed(v_des, params.wheel_radius));
  return track_wheels(stabilize, pid, setpoints, wheel_rates, ctrl, dt, params, feedforward);
}

VvaCommand vva_allocate(const ConfigurationType& ct, double base_omega, double steer_gain) {
  Vec3 d = Vec3::Zero();
  if (ct.desired_exit == Exit::Left) d = Vec3(0.0, 1.0, -1.0);
  if (ct.desired_exit == Exit::Right) d = Vec3(0.0, -1.0, 1.0);
  VvaCommand cmd;
  cmd.omega_des = base_omega * (Vec3::Ones() + steer_gain * d);
  return cmd;
}

ControlOutput phase2_control(const LqrGain& k, const PidGains& pid, const VvaCommand& cmd,
                             const RobotState& state, const Vec3& wheel_rates,
                             const ControllerState& ctrl, double dt, const RobotParams& params,
                             const WheelForces& feedforward) {
  const Vec4 pitch_only(state.phi, state.phi_dot, 0.0, 0.0);
  const Vec3 stabilize = lqr_control(k, pitch_only, params.f_max);
  return track_wheels(stabilize, pid, cmd.omega_des, wheel_rates, ctrl, dt, params, feedforward);
}

bool error_check(double rotation_accum, double desired_rotation, double tol) {
  return std::abs(rotation_accum - desired_rotation) <= tol;
}

std::string_view to_string(Mode mode) {
  switch (mode) {
    case Mode::StraightCruise:
      return "cruise";
    case Mode::JunctionSteer:
      return "steer";
    case Mode::TerminalStop:
      return "stop";
  }
  return "cruise";
}

std::optional<Mode> mode_from_string(std::string_view s) {
  if (s == "cruise") return Mode::StraightCruise;
  if (s == "steer") return Mode::JunctionSteer;
  if (s == "stop") return Mode::TerminalStop;
  return std::nullopt;
}

SupervisorOutput supervisor_step(const SupervisorState& sup, const SupervisorConfig& cfg,
                                 const RouteMap& map, const PositionEstimate& estimate,
                                 double sonar, double psi_rate, double dt) {
  SupervisorOutput out;
  out.state = sup;
  out.command.mode = sup.mode;

  switch (sup.mode) {
    case Mode::StraightCruise: {
      const std::size_t n = map.junction_count();
      const double total = map.route_length();
      const double s = std::clamp(estimate.mean, 0.0, total);
      const double sd = std::sqrt(std::max(estimate.variance, 0.0));
      const double target = sup.junction_index < n ? map.junction_position(sup.junction_index)
                                                   : total;
      const double predicted = std::max(0.0, target - s);

      // Until the filter has localised, a short reading cannot be told apart
      // from an outlier, so nothing switches.
      if (sd > cfg.pf_confidence_m) break;
      const bool consistent = std::abs(sonar - predicted) <= cfg.sonar_gate_m + 3.0 * sd;
      const double proximity = consistent ? std::min(sonar, predicted) : predicted;

      if (sup.junction_index < n) {
        const double d_switch = cfg.d_switch_m > 0.0
                                    ? cfg.d_switch_m
                                    : map.segments()[sup.junction_index].diameter;
        if (proximity <= d_switch) {
          out.state.mode = Mode::JunctionSteer;
          out.state.rotation_accum = 0.0;
        }
      } else if (proximity <= cfg.d_stop_m) {
        out.state.mode = Mode::TerminalStop;
      }
      break;
    }
    case Mode::JunctionSteer: {
      const auto& ct = map.ct_entry(sup.junction_index);
      out.state.rotation_accum += psi_rate * dt;
      if (error_check(out.state.rotation_accum, ct.desired_rotation, cfg.rotation_tol_rad)) {
        out.command.junction_completed = true;
        out.command.completed_rotation = out.state.rotation_accum;
        out.state.mode = Mode::StraightCruise;
        out.state.junction_index += 1;
        out.state.rotation_accum = 0.0;
      }
      break;
    }
    case Mode::TerminalStop:
      break;
  }

  out.command.mode = out.state.mode;
  if (out.state.mode == Mode::JunctionSteer)
    out.command.maneuver = map.ct_entry(out.state.junction_index);
  return out;
}

}  // namespace inpipe
