#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

#include "inpipe/control.hpp"
#include "inpipe/dynamics.hpp"
#include "inpipe/estimation.hpp"
#include "inpipe/pipe_map.hpp"
#include "inpipe/sensing.hpp"

namespace inpipe {

struct ControlConfig {
  Vec4 q_diag{10.0, 1.0, 10.0, 1.0};
  Vec3 r_diag{1.0, 1.0, 1.0};
  PidGains pid;
  double v_des_mps = 0.1;
  double steer_gain = 0.2;
  SupervisorConfig supervisor;
};

/// Everything one closed-loop run needs. Only `map` has no default.
struct Scenario {
  RouteMap map{{PipeSegment{}}, {}};
  RobotParams robot;
  double flow_velocity = 0.0;  // m/s, shared by all segments
  SonarModel sonar;
  OdometryModel odometry;
  ControlConfig control;
  PfConfig pf;
  double duration_s = 60.0;
  double dt_s = 0.01;
  int substeps = 10;  // dynamics steps per control tick
  std::uint64_t seed = 1;
  RobotState initial_state;

  /// Environment seen on segment i (inclination from the map).
  Environment environment(std::size_t segment) const {
    return {map.segments()[segment].inclination, flow_velocity};
  }

  /// Throws InvariantError/GeometryError naming the offending field.
  void validate() const;
};

Scenario parse_scenario(std::string_view text);
Scenario scenario_from_json(const nlohmann::json& doc);
Scenario load_scenario(const std::filesystem::path& path);
nlohmann::json scenario_to_json(const Scenario& scenario);

}  // namespace inpipe
