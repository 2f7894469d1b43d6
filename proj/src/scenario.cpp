#include "inpipe/scenario.hpp"

#include <fstream>
#include <sstream>

#include "inpipe/errors.hpp"
#include "json_fields.hpp"

namespace inpipe {

using detail::json;
using detail::number_field_or;

void Scenario::validate() const {
  robot.validate();
  sonar.validate();
  odometry.validate();
  pf.validate();
  control.pid.validate();
  if (!(dt_s > 0.0 && dt_s <= 0.1)) throw InvariantError("dt_s", "must lie in (0, 0.1]");
  if (!(duration_s > 0.0)) throw InvariantError("duration_s", "must be > 0");
  if (substeps < 1) throw InvariantError("substeps", "must be >= 1");
  if (!(initial_state.x >= 0.0 && initial_state.x <= map.route_length()))
    throw InvariantError("initial_state.x_m", "must lie on the route");
  if (!initial_state.finite()) throw InvariantError("initial_state", "must be finite");
  for (int i = 0; i < 4; ++i)
    if (!(control.q_diag[i] >= 0.0)) throw InvariantError("control.q_diag", "must be >= 0");
  for (int i = 0; i < 3; ++i)
    if (!(control.r_diag[i] > 0.0)) throw InvariantError("control.r_diag", "must be > 0");
  if (!(control.v_des_mps >= 0.0)) throw InvariantError("control.v_des_mps", "must be >= 0");
  if (!(control.steer_gain >= 0.0)) throw InvariantError("control.steer_gain", "must be >= 0");
  if (!(control.supervisor.d_stop_m > 0.0))
    throw InvariantError("control.d_stop_m", "must be > 0");
  if (!(control.supervisor.rotation_tol_rad > 0.0))
    throw InvariantError("control.rotation_tol_rad", "must be > 0");
  for (std::size_t i = 0; i < map.segments().size(); ++i)
    (void)arm_angle_from_diameter(robot, map.segments()[i].diameter);
}

namespace {

template <int N>
Eigen::Matrix<double, N, 1> fixed_vector(const json& obj, const char* key, const std::string& path,
                                         const Eigen::Matrix<double, N, 1>& fallback) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  const std::string p = detail::join_path(path, key);
  detail::require_array(*it, p);
  if (it->size() != N) throw SchemaError(p, "expected " + std::to_string(N) + " numbers");
  Eigen::Matrix<double, N, 1> v;
  for (int i = 0; i < N; ++i) v[i] = detail::as_number((*it)[i], detail::index_path(p, i));
  return v;
}

std::size_t count_field_or(const json& obj, const char* key, const std::string& path,
                           std::size_t fallback) {
  const long long v = detail::integer_field_or(obj, key, path, static_cast<long long>(fallback));
  if (v < 1) throw InvariantError(detail::join_path(path, key), "must be >= 1");
  return static_cast<std::size_t>(v);
}

void read_robot(const json& j, RobotParams& r) {
  const std::string p = "robot";
  detail::reject_unknown_keys(j, p,
                              {"mass_kg", "arm_length_m", "wheel_radius_m", "iyy", "izz",
                               "drag_coeff", "frontal_area_m2", "water_density", "body_radius_m",
                               "f_max_n"});
  r.mass = number_field_or(j, "mass_kg", p, r.mass);
  r.arm_length = number_field_or(j, "arm_length_m", p, r.arm_length);
  r.wheel_radius = number_field_or(j, "wheel_radius_m", p, r.wheel_radius);
  r.iyy = number_field_or(j, "iyy", p, r.iyy);
  r.izz = number_field_or(j, "izz", p, r.izz);
  r.drag_coeff = number_field_or(j, "drag_coeff", p, r.drag_coeff);
  r.frontal_area = number_field_or(j, "frontal_area_m2", p, r.frontal_area);
  r.water_density = number_field_or(j, "water_density", p, r.water_density);
  r.body_radius = number_field_or(j, "body_radius_m", p, r.body_radius);
  r.f_max = number_field_or(j, "f_max_n", p, r.f_max);
}

void read_control(const json& j, ControlConfig& c) {
  const std::string p = "control";
  detail::reject_unknown_keys(j, p,
                              {"q_diag", "r_diag", "pid", "v_des_mps", "steer_gain", "d_switch_m",
                               "d_stop_m", "rotation_tol_rad", "sonar_gate_m",
                               "pf_confidence_m"});
  c.q_diag = fixed_vector<4>(j, "q_diag", p, c.q_diag);
  c.r_diag = fixed_vector<3>(j, "r_diag", p, c.r_diag);
  if (auto it = j.find("pid"); it != j.end()) {
    const std::string pp = p + ".pid";
    detail::reject_unknown_keys(*it, pp, {"kp", "ki", "kd", "integral_limit"});
    c.pid.kp = number_field_or(*it, "kp", pp, c.pid.kp);
    c.pid.ki = number_field_or(*it, "ki", pp, c.pid.ki);
    c.pid.kd = number_field_or(*it, "kd", pp, c.pid.kd);
    c.pid.integral_limit = number_field_or(*it, "integral_limit", pp, c.pid.integral_limit);
  }
  c.v_des_mps = number_field_or(j, "v_des_mps", p, c.v_des_mps);
  c.steer_gain = number_field_or(j, "steer_gain", p, c.steer_gain);
  auto& s = c.supervisor;
  s.d_switch_m = number_field_or(j, "d_switch_m", p, s.d_switch_m);
  s.d_stop_m = number_field_or(j, "d_stop_m", p, s.d_stop_m);
  s.rotation_tol_rad = number_field_or(j, "rotation_tol_rad", p, s.rotation_tol_rad);
  s.sonar_gate_m = number_field_or(j, "sonar_gate_m", p, s.sonar_gate_m);
  s.pf_confidence_m = number_field_or(j, "pf_confidence_m", p, s.pf_confidence_m);
}

void read_pf(const json& j, PfConfig& c) {
  const std::string p = "pf";
  detail::reject_unknown_keys(
      j, p, {"n_init", "n_min", "n_max", "ess_threshold", "motion_sigma_floor_m", "kld",
             "lost_after_ticks", "lost_eta_ratio"});
  c.n_init = count_field_or(j, "n_init", p, c.n_init);
  c.n_min = count_field_or(j, "n_min", p, c.n_min);
  c.n_max = count_field_or(j, "n_max", p, c.n_max);
  c.ess_threshold = number_field_or(j, "ess_threshold", p, c.ess_threshold);
  c.motion_sigma_floor = number_field_or(j, "motion_sigma_floor_m", p, c.motion_sigma_floor);
  c.lost_eta_ratio = number_field_or(j, "lost_eta_ratio", p, c.lost_eta_ratio);
  const long long lost = detail::integer_field_or(j, "lost_after_ticks", p,
                                                  static_cast<long long>(c.lost_after_ticks));
  if (lost < 0) throw InvariantError(p + ".lost_after_ticks", "must be >= 0");
  c.lost_after_ticks = static_cast<std::size_t>(lost);
  if (auto it = j.find("kld"); it != j.end()) {
    const std::string kp = p + ".kld";
    detail::reject_unknown_keys(*it, kp, {"bin_m", "epsilon", "delta"});
    c.kld.bin_m = number_field_or(*it, "bin_m", kp, c.kld.bin_m);
    c.kld.epsilon = number_field_or(*it, "epsilon", kp, c.kld.epsilon);
    c.kld.delta = number_field_or(*it, "delta", kp, c.kld.delta);
  }
}

void read_initial_state(const json& j, RobotState& s) {
  const std::string p = "initial_state";
  detail::reject_unknown_keys(
      j, p, {"x_m", "x_dot_mps", "phi_rad", "phi_dot_radps", "psi_rad", "psi_dot_radps"});
  s.x = number_field_or(j, "x_m", p, s.x);
  s.x_dot = number_field_or(j, "x_dot_mps", p, s.x_dot);
  s.phi = number_field_or(j, "phi_rad", p, s.phi);
  s.phi_dot = number_field_or(j, "phi_dot_radps", p, s.phi_dot);
  s.psi = number_field_or(j, "psi_rad", p, s.psi);
  s.psi_dot = number_field_or(j, "psi_dot_radps", p, s.psi_dot);
}

}  // namespace

Scenario scenario_from_json(const json& doc) {
  detail::reject_unknown_keys(doc, "scenario",
                              {"version", "map", "robot", "environment", "sonar", "odometry",
                               "control", "pf", "duration_s", "dt_s", "substeps", "seed",
                               "initial_state"});
  if (auto v = doc.find("version"); v != doc.end())
    if (!v->is_number_integer() || v->get<long long>() != 1)
      throw SchemaError("scenario.version", "unsupported version (expected 1)");

  auto map_it = doc.find("map");
  if (map_it == doc.end()) throw SchemaError("scenario.map", "missing required key");
  Scenario sc;
  sc.map = map_from_json(*map_it, "map");

  if (auto it = doc.find("robot"); it != doc.end()) read_robot(*it, sc.robot);
  if (auto it = doc.find("environment"); it != doc.end()) {
    detail::reject_unknown_keys(*it, "environment", {"flow_velocity_mps"});
    sc.flow_velocity = number_field_or(*it, "flow_velocity_mps", "environment", 0.0);
  }
  if (auto it = doc.find("sonar"); it != doc.end()) {
    detail::reject_unknown_keys(*it, "sonar",
                                {"sigma_m", "max_range_m", "min_range_m", "outlier_prob"});
    sc.sonar.sigma = number_field_or(*it, "sigma_m", "sonar", sc.sonar.sigma);
    sc.sonar.max_range = number_field_or(*it, "max_range_m", "sonar", sc.sonar.max_range);
    sc.sonar.min_range = number_field_or(*it, "min_range_m", "sonar", sc.sonar.min_range);
    sc.sonar.outlier_prob = number_field_or(*it, "outlier_prob", "sonar", sc.sonar.outlier_prob);
  }
  if (auto it = doc.find("odometry"); it != doc.end()) {
    detail::reject_unknown_keys(*it, "odometry", {"sigma_per_meter"});
    sc.odometry.sigma_per_meter =
        number_field_or(*it, "sigma_per_meter", "odometry", sc.odometry.sigma_per_meter);
  }
  if (auto it = doc.find("control"); it != doc.end()) read_control(*it, sc.control);
  if (auto it = doc.find("pf"); it != doc.end()) read_pf(*it, sc.pf);
  if (auto it = doc.find("initial_state"); it != doc.end())
    read_initial_state(*it, sc.initial_state);

  sc.duration_s = number_field_or(doc, "duration_s", "scenario", sc.duration_s);
  sc.dt_s = number_field_or(doc, "dt_s", "scenario", sc.dt_s);
  sc.substeps = static_cast<int>(detail::integer_field_or(doc, "substeps", "scenario", 10));
  if (auto it = doc.find("seed"); it != doc.end()) {
    if (!it->is_number_unsigned() && !(it->is_number_integer() && it->get<long long>() >= 0))
      throw SchemaError("scenario.seed", "expected a non-negative integer");
    sc.seed = it->get<std::uint64_t>();
  }
  sc.validate();
  return sc;
}

Scenario parse_scenario(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw SchemaError("scenario", std::string("not valid JSON: ") + e.what());
  }
  return scenario_from_json(doc);
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open scenario file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

json scenario_to_json(const Scenario& sc) {
  const auto& r = sc.robot;
  const auto& c = sc.control;
  const auto& s = sc.initial_state;
  return {
      {"version", 1},
      {"map", map_to_json(sc.map)},
      {"robot",
       {{"mass_kg", r.mass},
        {"arm_length_m", r.arm_length},
        {"wheel_radius_m", r.wheel_radius},
        {"iyy", r.iyy},
        {"izz", r.izz},
        {"drag_coeff", r.drag_coeff},
        {"frontal_area_m2", r.frontal_area},
        {"water_density", r.water_density},
        {"body_radius_m", r.body_radius},
        {"f_max_n", r.f_max}}},
      {"environment", {{"flow_velocity_mps", sc.flow_velocity}}},
      {"sonar",
       {{"sigma_m", sc.sonar.sigma},
        {"max_range_m", sc.sonar.max_range},
        {"min_range_m", sc.sonar.min_range},
        {"outlier_prob", sc.sonar.outlier_prob}}},
      {"odometry", {{"sigma_per_meter", sc.odometry.sigma_per_meter}}},
      {"control",
       {{"q_diag", {c.q_diag[0], c.q_diag[1], c.q_diag[2], c.q_diag[3]}},
        {"r_diag", {c.r_diag[0], c.r_diag[1], c.r_diag[2]}},
        {"pid",
         {{"kp", c.pid.kp},
          {"ki", c.pid.ki},
          {"kd", c.pid.kd},
          {"integral_limit", c.pid.integral_limit}}},
        {"v_des_mps", c.v_des_mps},
        {"steer_gain", c.steer_gain},
        {"d_switch_m", c.supervisor.d_switch_m},
        {"d_stop_m", c.supervisor.d_stop_m},
        {"rotation_tol_rad", c.supervisor.rotation_tol_rad},
        {"sonar_gate_m", c.supervisor.sonar_gate_m},
        {"pf_confidence_m", c.supervisor.pf_confidence_m}}},
      {"pf",
       {{"n_init", sc.pf.n_init},
        {"n_min", sc.pf.n_min},
        {"n_max", sc.pf.n_max},
        {"ess_threshold", sc.pf.ess_threshold},
        {"motion_sigma_floor_m", sc.pf.motion_sigma_floor},
        {"lost_after_ticks", sc.pf.lost_after_ticks},
        {"lost_eta_ratio", sc.pf.lost_eta_ratio},
        {"kld",
         {{"bin_m", sc.pf.kld.bin_m}, {"epsilon", sc.pf.kld.epsilon}, {"delta", sc.pf.kld.delta}}}}},
      {"duration_s", sc.duration_s},
      {"dt_s", sc.dt_s},
      {"substeps", sc.substeps},
      {"seed", sc.seed},
      {"initial_state",
       {{"x_m", s.x},
        {"x_dot_mps", s.x_dot},
        {"phi_rad", s.phi},
        {"phi_dot_radps", s.phi_dot},
        {"psi_rad", s.psi},
        {"psi_dot_radps", s.psi_dot}}},
  };
}

}  // namespace inpipe
