#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace inpipe {

enum class ConfigKind { Bend, TJunction };
enum class Exit { Straight, Left, Right };

/// One entry of the CT array: what the non-straight configuration is and
/// which way the robot must leave it.
struct ConfigurationType {
  ConfigKind kind = ConfigKind::Bend;
  Exit desired_exit = Exit::Left;
  double desired_rotation = 0.0;  // rad, signed; positive turns left

  bool operator==(const ConfigurationType&) const = default;
};

struct PipeSegment {
  double length = 1.0;       // m
  double diameter = 0.3556;  // m
  double inclination = 0.0;  // rad

  bool operator==(const PipeSegment&) const = default;
};

struct Location {
  std::size_t segment = 0;
  double offset = 0.0;
};

struct Feature {
  enum class Kind { Junction, RouteEnd };
  Kind kind = Kind::RouteEnd;
  std::size_t junction = 0;  // valid when kind == Junction

  bool operator==(const Feature&) const = default;
};

struct FeatureDistance {
  double distance = 0.0;
  Feature feature;
};

/// The provisioned route: n+1 straight segments joined by n non-straight
/// configurations. Junction i sits between segment i and segment i+1 and has
/// zero arc length. Immutable once constructed.
class RouteMap {
 public:
  /// Throws InvariantError if the segments or CT entries are inconsistent.
  RouteMap(std::vector<PipeSegment> segments, std::vector<ConfigurationType> ct);

  const std::vector<PipeSegment>& segments() const { return segments_; }
  const std::vector<ConfigurationType>& ct() const { return ct_; }
  std::size_t junction_count() const { return ct_.size(); }

  double route_length() const { return starts_.back(); }

  /// Arc length at which segment i begins; i may equal segments().size(),
  /// in which case the route length is returned.
  double segment_start(std::size_t i) const { return starts_.at(i); }

  /// Arc length of junction i (the start of segment i+1).
  double junction_position(std::size_t i) const;

  /// Interior boundaries go to the downstream segment; s == route_length()
  /// maps to (last, last.length).
  Location locate(double s) const;

  FeatureDistance distance_to_next_feature(double s) const;

  const ConfigurationType& ct_entry(std::size_t i) const;

  const PipeSegment& segment_at(double s) const { return segments_[locate(s).segment]; }

  bool operator==(const RouteMap& other) const {
    return segments_ == other.segments_ && ct_ == other.ct_;
  }

 private:
  std::vector<PipeSegment> segments_;
  std::vector<ConfigurationType> ct_;
  std::vector<double> starts_;  // prefix sums, size segments_.size() + 1
};

/// Checks the CT entry invariants; `path` prefixes error messages.
void validate(const ConfigurationType& ct, const std::string& path);
void validate(const PipeSegment& seg, const std::string& path);

/// Parses a map document (version 1). Throws SchemaError or InvariantError.
RouteMap parse_map(std::string_view text);
RouteMap map_from_json(const nlohmann::json& doc, const std::string& path = "map");

nlohmann::json map_to_json(const RouteMap& map);
std::string render_map(const RouteMap& map);

std::string_view to_string(ConfigKind kind);
std::string_view to_string(Exit exit);

}  // namespace inpipe
