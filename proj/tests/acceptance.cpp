// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>

#include "inpipe/control.hpp"
#include "inpipe/dynamics.hpp"
#include "inpipe/estimation.hpp"
#include "inpipe/scenario.hpp"
#include "inpipe/simulation.hpp"

using namespace inpipe;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Scenario scenario(const std::string& name) {
  return load_scenario(fs::path(INPIPE_SCENARIO_DIR) / name);
}

Outcome ac1_settling() {
  const auto sc = scenario("fig3.json");
  const auto t0 = Clock::now();
  const auto run = replicate_fig3(sc);
  const double wall = seconds_since(t0);
  return {run.summary.settled_s <= 2.0 && wall < 5.0,
          fmt("settled_s=%.3f wall=%.2fs", run.summary.settled_s, wall)};
}

Outcome ac2_velocity() {
  auto sc = scenario("fig3.json");
  sc.initial_state.phi = sc.initial_state.psi = 0.0;
  sc.duration_s = 20.0;
  const auto run = run_scenario(sc);
  const double v = run.summary.v_ss_mps;
  return {std::abs(v - 0.1) <= 0.005, fmt("v_ss=%.5f m/s", v)};
}

Outcome ac3_terminal_stop() {
  const auto mc = monte_carlo(scenario("terminal_stop.json"), 50, 1);
  int ok = 0;
  for (const auto& r : mc.runs)
    if (r && r->reached_stop && r->stop_distance_m >= 0.3256 && r->stop_distance_m <= 0.3856) ++ok;
  return {ok >= 48, fmt("%d/50 in [0.3256, 0.3856], failures=%zu", ok, mc.failures.size())};
}

Outcome ac4_ac5_junctions(bool& ac5_pass, std::string& ac5_detail) {
  const auto sc = scenario("junctions.json");
  const auto mc = monte_carlo(sc, 50, 1);
  const double tol = sc.control.supervisor.rotation_tol_rad;
  int traversed = 0, localised = 0, contracted = 0;
  double worst = 0.0;
  for (const auto& r : mc.runs) {
    if (!r) continue;
    bool within = r->junctions_completed == 2 && !r->rotation_errors.empty();
    for (double e : r->rotation_errors) {
      worst = std::max(worst, e);
      within = within && e <= tol;
    }
    if (within) ++traversed;
    if (r->pf_final_error_m < mc.pf_error_threshold_m) ++localised;
    if (std::isfinite(r->pf_var_first_junction) &&
        r->pf_var_initial >= 10.0 * r->pf_var_first_junction)
      ++contracted;
  }
  ac5_pass = localised >= 48 && contracted >= 45;
  ac5_detail = fmt("final error < %.3f m in %d/50, variance 10x reduction in %d/50", mc.pf_error_threshold_m,
                   localised, contracted);
  return {traversed == 50,
          fmt("%d/50 completed both junctions, worst rotation error %.4f rad (tol %.3f), failures=%zu",
              traversed, worst, tol, mc.failures.size())};
}

Outcome ac6_oracle() {
  const RouteMap map({{5.0, 0.3556, 0.0}}, {});
  PfConfig c;
  c.n_init = c.n_min = c.n_max = 100000;
  const OdometryModel odom;
  const SonarModel sonar;
  const auto t0 = Clock::now();
  int ok = 0;
  double worst_mean = 0.0, worst_tv = 0.0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Rng rng = make_rng(seed, 3);
    Rng world = make_rng(seed, 1);
    const double u = 0.1;
    const double truth = 1.0 + 0.3 * static_cast<double>(seed);
    const auto z = simulate_sonar(map, truth, sonar, world);
    auto set = pf_init(map, c, rng);
    set = pf_predict(set, u, odom, c, map, rng);
    set = pf_update(set, z, map, sonar).set;
    const auto grid = grid_filter_oracle(map, uniform_grid(map, 0.01), u, z, odom, c, sonar);
    const double dm = std::abs(pf_estimate(set).mean - grid.mean());
    const double tv = total_variation(histogram(set, grid), grid);
    worst_mean = std::max(worst_mean, dm);
    worst_tv = std::max(worst_tv, tv);
    if (dm < 0.03 && tv < 0.05) ++ok;
  }
  const double wall = seconds_since(t0);
  return {ok == 10 && wall < 30.0,
          fmt("%d/10 seeds, worst |dmean|=%.4f m, worst TV=%.4f, wall=%.2fs", ok, worst_mean, worst_tv, wall)};
}

Outcome ac7_normalisation() {
  auto sc = scenario("junctions.json");
  sc.duration_s = 20.0;
  double worst = 0.0;
  std::size_t ticks = 0;
  run_scenario(sc, [&](const TickView& v) {
    long double sum = 0.0L;
    for (const auto& p : v.filter.particles().particles) sum += p.w;
    worst = std::max(worst, static_cast<double>(std::abs(sum - 1.0L)));
    ++ticks;
  });
  return {ticks >= 2000 && worst <= 1e-12, fmt("%zu ticks, max |sum w - 1|=%.3e", ticks, worst)};
}

Outcome ac8_linearisation() {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> scale(0.5, 2.0), th(0.05, 1.4), f(-5, 5), inc(-1.2, 1.2),
      flow(-1, 1);
  double worst = 0.0;
  const double h = 1e-4;
  for (int draw = 0; draw < 100; ++draw) {
    RobotParams p;
    p.mass *= scale(rng);
    p.arm_length *= scale(rng);
    p.iyy *= scale(rng);
    p.izz *= scale(rng);
    p.drag_coeff *= scale(rng);
    const Environment env{inc(rng), flow(rng)};
    const ArmConfig arms{{th(rng), th(rng), th(rng)}};
    const Vec3 f0(f(rng), f(rng), f(rng));
    const auto lin = linearize(p, env, arms);
    auto rel = [](double analytic, double fd) {
      return analytic == 0.0 ? std::abs(fd) : std::abs(fd - analytic) / std::abs(analytic);
    };
    for (int j = 0; j < 3; ++j) {
      Vec3 fp = f0, fm = f0;
      fp[j] += h;
      fm[j] -= h;
      worst = std::max(worst, rel(lin.b(1, j), (pitch_accel(p, arms, fp) - pitch_accel(p, arms, fm)) / (2 * h)));
      worst = std::max(worst, rel(lin.b(3, j),
                                  (yaw_accel(p, env, arms, fp) - yaw_accel(p, env, arms, fm)) / (2 * h)));
    }
    const RobotState s0;
    for (int k = 0; k < 4; ++k) {
      RobotState sp = s0, sm = s0;
      double* up[] = {&sp.phi, &sp.phi_dot, &sp.psi, &sp.psi_dot};
      double* dn[] = {&sm.phi, &sm.phi_dot, &sm.psi, &sm.psi_dot};
      *up[k] += h;
      *dn[k] -= h;
      const auto dp = derivative(p, env, arms, f0, sp);
      const auto dm = derivative(p, env, arms, f0, sm);
      const Vec4 fd((dp.phi - dm.phi) / (2 * h), (dp.phi_dot - dm.phi_dot) / (2 * h),
                    (dp.psi - dm.psi) / (2 * h), (dp.psi_dot - dm.psi_dot) / (2 * h));
      for (int i = 0; i < 4; ++i) worst = std::max(worst, rel(lin.a(i, k), fd[i]));
    }
  }
  return {worst <= 1e-6, fmt("100 draws, max relative error %.3e", worst)};
}

Outcome ac9_lqr() {
  const RobotParams p;
  const auto plant = linearize(p, {}, arm_angle_from_diameter(p, 0.3556));
  const Mat4 q = Vec4(10, 1, 10, 1).asDiagonal();
  const Eigen::Matrix3d r = Eigen::Matrix3d::Identity();
  const auto g = lqr_design(plant, q, r);
  const double residual = care_residual(plant.a, plant.b, q, r, g.p);
  const Mat4 acl = plant.a - plant.b * g.k;
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  const double dt = 1e-3;
  double worst_rise = -INFINITY;
  for (int traj = 0; traj < 100; ++traj) {
    Vec4 x(u(rng), u(rng), u(rng), u(rng));
    double v = x.dot(g.p * x);
    for (int i = 0; i < 5000; ++i) {
      const Vec4 k1 = acl * x, k2 = acl * (x + 0.5 * dt * k1), k3 = acl * (x + 0.5 * dt * k2),
                 k4 = acl * (x + dt * k3);
      x += dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
      const double vn = x.dot(g.p * x);
      worst_rise = std::max(worst_rise, vn - v);
      v = vn;
    }
  }
  return {worst_rise <= 1e-9 && residual < 1e-9,
          fmt("max step increase %.3e, CARE residual %.3e", worst_rise, residual)};
}

Outcome ac10_determinism() {
  const auto dir = fs::temp_directory_path() / "inpipe_acceptance_det";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const auto scen = (fs::path(INPIPE_SCENARIO_DIR) / "junctions.json").string();
  auto run = [&](const std::string& tag) {
    const auto trace = dir / (tag + ".csv");
    const std::string cmd = std::string("\"") + INPIPE_CLI + "\" simulate --scenario \"" + scen +
                            "\" --out-trace \"" + trace.string() + "\" --out-summary \"" +
                            (dir / (tag + ".json")).string() + "\" --seed 7";
    const int rc = std::system(cmd.c_str());
    std::ifstream in(trace, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return std::make_pair(rc, ss.str());
  };
  const auto a = run("a"), b = run("b");
  fs::remove_all(dir);
  const bool pass = a.first == 0 && b.first == 0 && !a.second.empty() && a.second == b.second;
  return {pass, fmt("exit codes %d/%d, %zu bytes, identical=%s", a.first, b.first, a.second.size(),
                    a.second == b.second ? "yes" : "no")};
}

Outcome ac11_rk4_order() {
  const RobotParams p;
  const Environment env{0.05, 0.02};
  const ArmConfig arms{{0.3, 0.4, 0.5}};
  const Vec3 f(2.0, 1.5, 1.0);
  RobotState s0;
  s0.x_dot = 0.3;
  auto run = [&](double dt, int n) {
    RobotState s = s0;
    for (int i = 0; i < n; ++i) s = step(p, env, arms, f, s, dt);
    return s.x_dot;
  };
  const double ref = run(0.1 / 512, 512 * 20);
  const double ratio = std::abs(run(0.1, 20) - ref) / std::abs(run(0.05, 40) - ref);
  return {std::abs(ratio - 16.0) <= 3.2, fmt("error ratio %.3f", ratio)};
}

}  // namespace

int main() {
  int failed = 0;
  auto report = [&](const char* id, const std::function<Outcome()>& f) {
    Outcome o;
    try {
      o = f();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::cout << (o.pass ? "PASS " : "FAIL ") << id << "  " << o.detail << std::endl;
  };
  bool ac5 = false;
  std::string ac5_detail = "not run";
  report("AC1", ac1_settling);
  report("AC2", ac2_velocity);
  report("AC3", ac3_terminal_stop);
  report("AC4", [&] { return ac4_ac5_junctions(ac5, ac5_detail); });
  report("AC5", [&] { return Outcome{ac5, ac5_detail}; });
  report("AC6", ac6_oracle);
  report("AC7", ac7_normalisation);
  report("AC8", ac8_linearisation);
  report("AC9", ac9_lqr);
  report("AC10", ac10_determinism);
  report("AC11", ac11_rk4_order);
  return failed == 0 ? 0 : 1;
}
