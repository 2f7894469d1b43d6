#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "inpipe/control.hpp"
#include "inpipe/dynamics.hpp"
#include "inpipe/estimation.hpp"
#include "inpipe/scenario.hpp"

namespace inpipe {

/// One control tick: the true state at time t, what the sensors and the
/// filter reported, and the forces applied over [t, t + dt).
struct TraceRecord {
  double t = 0.0;
  RobotState state;
  Mode mode = Mode::StraightCruise;
  std::size_t junction_index = 0;
  double sonar = 0.0;
  double pf_mean = 0.0;
  double pf_var = 0.0;
  std::size_t n_particles = 0;
  Vec3 forces = Vec3::Zero();
  Vec3 wheel_omega = Vec3::Zero();  // rev/s
};

struct RunSummary {
  double settled_s = 0.0;
  double v_ss_mps = 0.0;
  double stop_distance_m = 0.0;  // NaN when the run never stopped
  std::size_t junctions_completed = 0;
  double pf_final_error_m = 0.0;

  bool reached_stop = false;
  std::vector<double> rotation_errors;  // |accum - desired| at each error-check pass
  double pf_var_initial = 0.0;
  double pf_var_first_junction = 0.0;  // NaN when no junction was passed
  std::size_t ticks = 0;
};

struct RunResult {
  std::vector<TraceRecord> trace;
  RunSummary summary;
};

/// Read-only view handed to a tick observer after each record is made.
struct TickView {
  std::size_t tick;
  const TraceRecord& record;
  const ParticleFilter& filter;
  const ParticleFilter::StepInfo& filter_step;
};

using TickObserver = std::function<void(const TickView&)>;

/// Closed-loop run: sensors -> particle filter -> supervisor -> controller
/// -> dynamics, once per tick. Deterministic for a given scenario (seed
/// included). Throws SimulationDiverged when the state becomes non-finite.
RunResult run_scenario(const Scenario& scenario, const TickObserver& observer = {});

/// Straight-pipe stabilisation run. Throws InvariantError if the map has
/// junctions.
RunResult replicate_fig3(const Scenario& scenario);

/// Time after which |phi| and |psi| stay within 5% of the initial deviation,
/// measured over the leading cruise interval.
double settling_time(const std::vector<TraceRecord>& trace, double dt);

struct MetricStats {
  std::size_t count = 0;
  double mean = 0.0;
  double std = 0.0;
  double min = 0.0;
  double p05 = 0.0;
  double p50 = 0.0;
  double p95 = 0.0;
  double max = 0.0;
};

MetricStats describe(std::vector<double> values);

struct TrialFailure {
  std::uint64_t seed;
  std::string message;
};

struct MonteCarloResult {
  std::size_t trials = 0;
  std::uint64_t seed_base = 0;
  std::vector<std::optional<RunSummary>> runs;  // seed order; empty on failure
  std::vector<TrialFailure> failures;
  double pf_error_threshold_m = 0.0;
  double pf_success_fraction = 0.0;
  MetricStats settled_s, v_ss_mps, stop_distance_m, junctions_completed, pf_final_error_m;
};

/// Runs seeds seed_base .. seed_base + trials - 1. Failed runs are recorded,
/// not rethrown. The PF threshold defaults to 0.1 x the shortest segment.
/// Runs may execute on `threads` workers; results are merged in seed order.
MonteCarloResult monte_carlo(const Scenario& scenario, std::size_t trials, std::uint64_t seed_base,
                             std::optional<double> pf_error_threshold = std::nullopt,
                             unsigned threads = 0);

nlohmann::json to_json(const RunSummary& summary);
nlohmann::json to_json(const MetricStats& stats);
nlohmann::json to_json(const MonteCarloResult& result);

}  // namespace inpipe
