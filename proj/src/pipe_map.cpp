#include "inpipe/pipe_map.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "inpipe/errors.hpp"
#include "json_fields.hpp"

namespace inpipe {

using detail::json;

void validate(const PipeSegment& seg, const std::string& path) {
  if (!(seg.length > 0.0) || !std::isfinite(seg.length))
    throw InvariantError(path + ".length_m", "must be > 0");
  if (!(seg.diameter > 0.0) || !std::isfinite(seg.diameter))
    throw InvariantError(path + ".diameter_m", "must be > 0");
  if (!(std::abs(seg.inclination) <= std::numbers::pi / 2))
    throw InvariantError(path + ".inclination_rad", "must satisfy |inclination| <= pi/2");
}

void validate(const ConfigurationType& ct, const std::string& path) {
  if (ct.kind == ConfigKind::Bend && ct.desired_exit == Exit::Straight)
    throw InvariantError(path + ".desired_exit", "a bend has no straight exit");
  const double rot = ct.desired_rotation;
  if (!std::isfinite(rot)) throw InvariantError(path + ".desired_rotation_rad", "must be finite");
  if (ct.desired_exit == Exit::Straight) {
    if (rot != 0.0)
      throw InvariantError(path + ".desired_rotation_rad", "must be 0 for a straight exit");
    return;
  }
  if (!(std::abs(rot) > 0.0 && std::abs(rot) < std::numbers::pi))
    throw InvariantError(path + ".desired_rotation_rad", "|rotation| must lie in (0, pi)");
  if ((ct.desired_exit == Exit::Left) != (rot > 0.0))
    throw InvariantError(path + ".desired_rotation_rad",
                         "sign must match the exit (left positive, right negative)");
}

RouteMap::RouteMap(std::vector<PipeSegment> segments, std::vector<ConfigurationType> ct)
    : segments_(std::move(segments)), ct_(std::move(ct)) {
  if (segments_.empty()) throw InvariantError("map.segments", "at least one segment required");
  if (segments_.size() != ct_.size() + 1)
    throw InvariantError("map.ct", "expected " + std::to_string(segments_.size() - 1) +
                                       " entries (one per junction), got " +
                                       std::to_string(ct_.size()));
  for (std::size_t i = 0; i < segments_.size(); ++i)
    validate(segments_[i], detail::index_path("map.segments", i));
  for (std::size_t i = 0; i < ct_.size(); ++i) validate(ct_[i], detail::index_path("map.ct", i));

  starts_.reserve(segments_.size() + 1);
  starts_.push_back(0.0);
  for (const auto& seg : segments_) starts_.push_back(starts_.back() + seg.length);
}

double RouteMap::junction_position(std::size_t i) const {
  if (i >= ct_.size()) throw IndexError("junction index " + std::to_string(i) + " out of range");
  return starts_[i + 1];
}

Location RouteMap::locate(double s) const {
  const double total = route_length();
  if (!(s >= 0.0 && s <= total))
    throw OutOfRoute("arc length " + std::to_string(s) + " outside [0, " + std::to_string(total) +
                     "]");
  const std::size_t last = segments_.size() - 1;
  if (s == total) return {last, segments_[last].length};
  // First start strictly greater than s, so boundaries land downstream.
  auto it = std::upper_bound(starts_.begin(), starts_.end(), s);
  const auto i = static_cast<std::size_t>(std::distance(starts_.begin(), it)) - 1;
  const double start = starts_[i];
  double offset = s - start;
  // s - start can round when s > 2 * start. Step the offset by ulps so that
  // start + offset reproduces s whenever any offset can; otherwise it lands
  // one ulp below s (start's low bits can force a rounding tie).
  while (start + offset < s) offset = std::nextafter(offset, INFINITY);
  while (start + offset > s) offset = std::nextafter(offset, -INFINITY);
  return {i, offset};
}

FeatureDistance RouteMap::distance_to_next_feature(double s) const {
  const Location loc = locate(s);
  FeatureDistance out;
  out.distance = std::max(0.0, starts_[loc.segment + 1] - s);
  if (loc.segment + 1 < segments_.size()) {
    out.feature = {Feature::Kind::Junction, loc.segment};
  } else {
    out.feature = {Feature::Kind::RouteEnd, 0};
  }
  return out;
}

const ConfigurationType& RouteMap::ct_entry(std::size_t i) const {
  if (i >= ct_.size())
    throw IndexError("CT index " + std::to_string(i) + " out of range (size " +
                     std::to_string(ct_.size()) + ")");
  return ct_[i];
}

std::string_view to_string(ConfigKind kind) {
  return kind == ConfigKind::Bend ? "bend" : "t_junction";
}

std::string_view to_string(Exit exit) {
  switch (exit) {
    case Exit::Straight:
      return "straight";
    case Exit::Left:
      return "left";
    case Exit::Right:
      return "right";
  }
  return "straight";
}

namespace {

ConfigKind parse_kind(const std::string& s, const std::string& path) {
  if (s == "bend") return ConfigKind::Bend;
  if (s == "t_junction") return ConfigKind::TJunction;
  throw SchemaError(path, "expected \"bend\" or \"t_junction\", got \"" + s + "\"");
}

Exit parse_exit(const std::string& s, const std::string& path) {
  if (s == "straight") return Exit::Straight;
  if (s == "left") return Exit::Left;
  if (s == "right") return Exit::Right;
  throw SchemaError(path, "expected \"straight\", \"left\" or \"right\", got \"" + s + "\"");
}

}  // namespace

RouteMap map_from_json(const json& doc, const std::string& path) {
  detail::reject_unknown_keys(doc, path, {"version", "segments", "ct"});
  auto version = doc.find("version");
  if (version == doc.end()) throw SchemaError(path + ".version", "missing required key");
  if (!version->is_number_integer() || version->get<long long>() != 1)
    throw SchemaError(path + ".version", "unsupported version (expected 1)");

  auto seg_it = doc.find("segments");
  if (seg_it == doc.end()) throw SchemaError(path + ".segments", "missing required key");
  const auto& segs = detail::require_array(*seg_it, path + ".segments");
  std::vector<PipeSegment> segments;
  for (std::size_t i = 0; i < segs.size(); ++i) {
    const std::string p = detail::index_path(path + ".segments", i);
    detail::reject_unknown_keys(segs[i], p, {"length_m", "diameter_m", "inclination_rad"});
    PipeSegment seg;
    seg.length = detail::number_field(segs[i], "length_m", p);
    seg.diameter = detail::number_field(segs[i], "diameter_m", p);
    seg.inclination = detail::number_field_or(segs[i], "inclination_rad", p, 0.0);
    segments.push_back(seg);
  }

  auto ct_it = doc.find("ct");
  if (ct_it == doc.end()) throw SchemaError(path + ".ct", "missing required key");
  const auto& cts = detail::require_array(*ct_it, path + ".ct");
  std::vector<ConfigurationType> ct;
  for (std::size_t i = 0; i < cts.size(); ++i) {
    const std::string p = detail::index_path(path + ".ct", i);
    detail::reject_unknown_keys(cts[i], p, {"kind", "desired_exit", "desired_rotation_rad"});
    ConfigurationType entry;
    entry.kind = parse_kind(detail::string_field(cts[i], "kind", p), p + ".kind");
    entry.desired_exit =
        parse_exit(detail::string_field(cts[i], "desired_exit", p), p + ".desired_exit");
    entry.desired_rotation = detail::number_field(cts[i], "desired_rotation_rad", p);
    ct.push_back(entry);
  }
  return RouteMap(std::move(segments), std::move(ct));
}

RouteMap parse_map(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw SchemaError("map", std::string("not valid JSON: ") + e.what());
  }
  return map_from_json(doc, "map");
}

json map_to_json(const RouteMap& map) {
  json segs = json::array();
  for (const auto& s : map.segments())
    segs.push_back({{"length_m", s.length}, {"diameter_m", s.diameter},
                    {"inclination_rad", s.inclination}});
  json cts = json::array();
  for (const auto& c : map.ct())
    cts.push_back({{"kind", to_string(c.kind)},
                   {"desired_exit", to_string(c.desired_exit)},
                   {"desired_rotation_rad", c.desired_rotation}});
  return {{"version", 1}, {"segments", std::move(segs)}, {"ct", std::move(cts)}};
}

std::string render_map(const RouteMap& map) { return map_to_json(map).dump(2); }

}  // namespace inpipe
