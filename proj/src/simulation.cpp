#include "inpipe/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numbers>
#include <thread>

#include "inpipe/errors.hpp"

namespace inpipe {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Per-segment controller setup: arm angles follow the pipe diameter, and the
// LQR is designed on the plant linearised for those arms.
struct SegmentPlant {
  Environment env;
  ArmConfig arms;
  LqrGain gain;
  WheelForces cruise_ff;
  WheelForces hold_ff;
};

std::vector<SegmentPlant> design_segments(const Scenario& sc) {
  const Mat4 q = sc.control.q_diag.asDiagonal();
  const Eigen::Matrix3d r = sc.control.r_diag.asDiagonal();
  std::vector<SegmentPlant> out;
  for (std::size_t i = 0; i < sc.map.segments().size(); ++i) {
    SegmentPlant sp;
    sp.env = sc.environment(i);
    sp.arms = arm_angle_from_diameter(sc.robot, sc.map.segments()[i].diameter);
    sp.gain = lqr_design(linearize(sc.robot, sp.env, sp.arms), q, r);
    sp.cruise_ff = nominal_forces(sc.robot, sp.env, sp.arms, sc.control.v_des_mps);
    sp.hold_ff = nominal_forces(sc.robot, sp.env, sp.arms, 0.0);
    out.push_back(sp);
  }
  return out;
}

bool stop_settled(const RobotState& s) {
  return std::abs(s.x_dot) < 1e-3 && std::abs(s.phi) < 5e-3 && std::abs(s.psi) < 5e-3 &&
         std::abs(s.phi_dot) < 1e-2 && std::abs(s.psi_dot) < 1e-2;
}

void keep_on_route(RobotState& s, double lo, double hi) {
  if (s.x > hi) {
    s.x = hi;
    s.x_dot = std::min(s.x_dot, 0.0);
  }
  if (s.x < lo) {
    s.x = lo;
    s.x_dot = std::max(s.x_dot, 0.0);
  }
}

}  // namespace

double settling_time(const std::vector<TraceRecord>& trace, double dt) {
  if (trace.empty()) return 0.0;
  const auto& first = trace.front().state;
  const double band = 0.05 * std::max(std::abs(first.phi), std::abs(first.psi));
  if (band == 0.0) return 0.0;
  std::size_t end = trace.size();
  for (std::size_t i = 1; i < trace.size(); ++i) {
    if (trace[i].mode != trace.front().mode) {
      end = i;
      break;
    }
  }
  std::optional<std::size_t> last_out;
  for (std::size_t i = 0; i < end; ++i)
    if (std::abs(trace[i].state.phi) > band || std::abs(trace[i].state.psi) > band) last_out = i;
  if (!last_out) return 0.0;
  if (*last_out + 1 < end) return trace[*last_out + 1].t;
  return trace[*last_out].t + dt;
}

RunResult run_scenario(const Scenario& sc, const TickObserver& observer) {
  sc.validate();
  const RouteMap& map = sc.map;
  const double total = map.route_length();
  const double dt = sc.dt_s;
  const auto plants = design_segments(sc);

  Rng sonar_rng = make_rng(sc.seed, 1);
  Rng odom_rng = make_rng(sc.seed, 2);
  ParticleFilter filter(map, sc.pf, sc.sonar, sc.odometry, make_rng(sc.seed, 3));

  RunResult result;
  RunSummary& sum = result.summary;
  sum.stop_distance_m = kNaN;
  sum.pf_var_first_junction = kNaN;
  sum.pf_var_initial = filter.estimate().variance;

  RobotState state = sc.initial_state;
  double x_prev = state.x;
  SupervisorState sup;
  ControllerState ctrl;

  const auto ticks = static_cast<std::size_t>(std::max(1.0, std::round(sc.duration_s / dt)));
  result.trace.reserve(ticks);

  for (std::size_t k = 0; k < ticks; ++k) {
    TraceRecord rec;
    rec.t = static_cast<double>(k) * dt;

    // Sense and localise.
    const SonarReading z = simulate_sonar(map, state.x, sc.sonar, sonar_rng);
    const double odo = simulate_odometry(state.x - x_prev, sc.odometry, odom_rng);
    x_prev = state.x;
    const auto pf_step = filter.step(odo, z);
    const PositionEstimate est = filter.estimate();

    // Choose the phase.
    const Mode before = sup.mode;
    const SupervisorOutput so =
        supervisor_step(sup, sc.control.supervisor, map, est, z.distance, state.psi_dot, dt);
    if (so.command.junction_completed) {
      const auto& ct = map.ct_entry(sup.junction_index);
      sum.rotation_errors.push_back(std::abs(so.command.completed_rotation - ct.desired_rotation));
      if (sum.junctions_completed == 0) sum.pf_var_first_junction = est.variance;
      sum.junctions_completed += 1;
      // The maneuver ends at the downstream segment start, heading measured
      // against the new pipe axis.
      state.x = map.junction_position(sup.junction_index);
      state.psi -= ct.desired_rotation;
    }
    sup = so.state;
    if (sup.mode != before) ctrl = ControllerState{};
    if (sup.mode == Mode::TerminalStop && !sum.reached_stop) {
      sum.reached_stop = true;
      sum.stop_distance_m = z.distance;
    }

    // Control.
    const std::size_t seg = map.locate(state.x).segment;
    const SegmentPlant& plant = plants[seg];
    const double omega = wheel_rate(sc.robot, state.x_dot) / (2.0 * std::numbers::pi);
    const Vec3 rates = Vec3::Constant(omega);
    ControlOutput co;
    switch (sup.mode) {
      case Mode::StraightCruise:
        co = phase1_control(plant.gain, sc.control.pid, sc.control.v_des_mps, state, rates, ctrl,
                            dt, sc.robot, plant.cruise_ff);
        break;
      case Mode::JunctionSteer: {
        const double base = desired_wheel_speed(sc.control.v_des_mps, sc.robot.wheel_radius);
        const VvaCommand cmd = vva_allocate(*so.command.maneuver, base, sc.control.steer_gain);
        co = phase2_control(plant.gain, sc.control.pid, cmd, state, rates, ctrl, dt, sc.robot,
                            plant.cruise_ff);
        break;
      }
      case Mode::TerminalStop:
        co = phase1_control(plant.gain, sc.control.pid, 0.0, state, rates, ctrl, dt, sc.robot,
                            plant.hold_ff);
        break;
    }
    ctrl = co.state;

    rec.state = state;
    rec.mode = sup.mode;
    rec.junction_index = sup.junction_index;
    rec.sonar = z.distance;
    rec.pf_mean = est.mean;
    rec.pf_var = est.variance;
    rec.n_particles = filter.particles().particles.size();
    rec.forces = co.forces;
    rec.wheel_omega = rates;
    result.trace.push_back(rec);
    if (observer) observer(TickView{k, result.trace.back(), filter, pf_step});

    if (sup.mode == Mode::TerminalStop && stop_settled(state)) break;

    // Advance the plant. Inside a junction maneuver the arc length is frozen
    // and only the attitude and wheel motion evolve.
    const bool frozen = sup.mode == Mode::JunctionSteer;
    const double x_hold = state.x;
    const double h = dt / static_cast<double>(sc.substeps);
    try {
      for (int i = 0; i < sc.substeps; ++i) {
        state = step(sc.robot, plant.env, plant.arms, co.forces, state, h);
        if (frozen)
          state.x = x_hold;
        else
          keep_on_route(state, 0.0, total);
      }
    } catch (const NonFinite& e) {
      throw SimulationDiverged(static_cast<long>(k), e.what());
    }
  }

  const auto& trace = result.trace;
  sum.ticks = trace.size();
  sum.settled_s = settling_time(trace, dt);
  const std::size_t tail = std::max<std::size_t>(1, trace.size() / 5);
  double v = 0.0;
  for (std::size_t i = trace.size() - tail; i < trace.size(); ++i) v += trace[i].state.x_dot;
  sum.v_ss_mps = v / static_cast<double>(tail);
  sum.pf_final_error_m = std::abs(trace.back().pf_mean - trace.back().state.x);
  return result;
}

RunResult replicate_fig3(const Scenario& sc) {
  if (sc.map.junction_count() != 0)
    throw InvariantError("map.ct", "the stabilisation run needs a straight pipe (no junctions)");
  return run_scenario(sc);
}

MetricStats describe(std::vector<double> values) {
  values.erase(std::remove_if(values.begin(), values.end(),
                              [](double v) { return !std::isfinite(v); }),
               values.end());
  MetricStats st;
  st.count = values.size();
  if (values.empty()) {
    st.mean = st.std = st.min = st.p05 = st.p50 = st.p95 = st.max = kNaN;
    return st;
  }
  std::sort(values.begin(), values.end());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  st.mean = mean;
  st.std = values.size() > 1 ? std::sqrt(var / static_cast<double>(values.size() - 1)) : 0.0;
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
  };
  st.min = values.front();
  st.max = values.back();
  st.p05 = quantile(0.05);
  st.p50 = quantile(0.5);
  st.p95 = quantile(0.95);
  return st;
}

MonteCarloResult monte_carlo(const Scenario& sc, std::size_t trials, std::uint64_t seed_base,
                             std::optional<double> pf_error_threshold, unsigned threads) {
  if (trials < 1) throw InvariantError("trials", "must be >= 1");
  MonteCarloResult mc;
  mc.trials = trials;
  mc.seed_base = seed_base;
  mc.runs.resize(trials);
  std::vector<std::string> errors(trials);

  double shortest = std::numeric_limits<double>::infinity();
  for (const auto& seg : sc.map.segments()) shortest = std::min(shortest, seg.length);
  mc.pf_error_threshold_m = pf_error_threshold.value_or(0.1 * shortest);

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < trials; i = next++) {
      Scenario run = sc;
      run.seed = seed_base + i;
      try {
        mc.runs[i] = run_scenario(run).summary;
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, trials));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  std::vector<double> settled, vss, stop, junctions, pf_err;
  std::size_t pf_ok = 0;
  for (std::size_t i = 0; i < trials; ++i) {
    if (!mc.runs[i]) {
      mc.failures.push_back({seed_base + i, errors[i]});
      continue;
    }
    const RunSummary& r = *mc.runs[i];
    settled.push_back(r.settled_s);
    vss.push_back(r.v_ss_mps);
    stop.push_back(r.stop_distance_m);
    junctions.push_back(static_cast<double>(r.junctions_completed));
    pf_err.push_back(r.pf_final_error_m);
    if (r.pf_final_error_m < mc.pf_error_threshold_m) ++pf_ok;
  }
  mc.pf_success_fraction = static_cast<double>(pf_ok) / static_cast<double>(trials);
  mc.settled_s = describe(settled);
  mc.v_ss_mps = describe(vss);
  mc.stop_distance_m = describe(stop);
  mc.junctions_completed = describe(junctions);
  mc.pf_final_error_m = describe(pf_err);
  return mc;
}

nlohmann::json to_json(const RunSummary& s) {
  return {{"settled_s", s.settled_s},
          {"v_ss_mps", s.v_ss_mps},
          {"stop_distance_m", s.stop_distance_m},
          {"junctions_completed", s.junctions_completed},
          {"pf_final_error_m", s.pf_final_error_m},
          {"reached_stop", s.reached_stop},
          {"rotation_errors_rad", s.rotation_errors},
          {"pf_var_initial_m2", s.pf_var_initial},
          {"pf_var_first_junction_m2", s.pf_var_first_junction},
          {"ticks", s.ticks}};
}

nlohmann::json to_json(const MetricStats& s) {
  return {{"count", s.count}, {"mean", s.mean}, {"std", s.std}, {"min", s.min},
          {"p05", s.p05},     {"p50", s.p50},   {"p95", s.p95}, {"max", s.max}};
}

nlohmann::json to_json(const MonteCarloResult& mc) {
  nlohmann::json failures = nlohmann::json::array();
  for (const auto& f : mc.failures) failures.push_back({{"seed", f.seed}, {"error", f.message}});
  nlohmann::json runs = nlohmann::json::array();
  for (std::size_t i = 0; i < mc.runs.size(); ++i) {
    nlohmann::json r = mc.runs[i] ? to_json(*mc.runs[i]) : nlohmann::json(nullptr);
    runs.push_back({{"seed", mc.seed_base + i}, {"summary", r}});
  }
  return {{"trials", mc.trials},
          {"seed_base", mc.seed_base},
          {"succeeded", mc.trials - mc.failures.size()},
          {"pf_error_threshold_m", mc.pf_error_threshold_m},
          {"pf_success_fraction", mc.pf_success_fraction},
          {"metrics",
           {{"settled_s", to_json(mc.settled_s)},
            {"v_ss_mps", to_json(mc.v_ss_mps)},
            {"stop_distance_m", to_json(mc.stop_distance_m)},
            {"junctions_completed", to_json(mc.junctions_completed)},
            {"pf_final_error_m", to_json(mc.pf_final_error_m)}}},
          {"failures", failures},
          {"runs", runs}};
}

}  // namespace inpipe
