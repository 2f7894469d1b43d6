#pragma once

// Strict field access for the document readers. Every object is checked for
// unknown keys before any field is read.

#include <cmath>
#include <initializer_list>
#include <string>
#include <string_view>

#include <json.hpp>

#include "inpipe/errors.hpp"

namespace inpipe::detail {

using nlohmann::json;

inline std::string join_path(const std::string& base, std::string_view key) {
  return base + "." + std::string(key);
}

inline std::string index_path(const std::string& base, std::size_t i) {
  return base + "[" + std::to_string(i) + "]";
}

inline const json& require_object(const json& j, const std::string& path) {
  if (!j.is_object()) throw SchemaError(path, "expected an object");
  return j;
}

inline const json& require_array(const json& j, const std::string& path) {
  if (!j.is_array()) throw SchemaError(path, "expected an array");
  return j;
}

inline void reject_unknown_keys(const json& obj, const std::string& path,
                                std::initializer_list<std::string_view> allowed) {
  require_object(obj, path);
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (auto key : allowed) {
      if (it.key() == key) {
        known = true;
        break;
      }
    }
    if (!known) throw SchemaError(join_path(path, it.key()), "unknown key");
  }
}

inline double as_number(const json& j, const std::string& path) {
  if (!j.is_number()) throw SchemaError(path, "expected a number");
  double v = j.get<double>();
  if (!std::isfinite(v)) throw InvariantError(path, "must be finite");
  return v;
}

inline double number_field(const json& obj, std::string_view key, const std::string& path) {
  auto it = obj.find(std::string(key));
  if (it == obj.end()) throw SchemaError(join_path(path, key), "missing required key");
  return as_number(*it, join_path(path, key));
}

inline double number_field_or(const json& obj, std::string_view key, const std::string& path,
                              double fallback) {
  auto it = obj.find(std::string(key));
  if (it == obj.end()) return fallback;
  return as_number(*it, join_path(path, key));
}

inline long long integer_field_or(const json& obj, std::string_view key, const std::string& path,
                                  long long fallback) {
  auto it = obj.find(std::string(key));
  if (it == obj.end()) return fallback;
  if (!it->is_number_integer()) throw SchemaError(join_path(path, key), "expected an integer");
  return it->get<long long>();
}

inline std::string string_field(const json& obj, std::string_view key, const std::string& path) {
  auto it = obj.find(std::string(key));
  if (it == obj.end()) throw SchemaError(join_path(path, key), "missing required key");
  if (!it->is_string()) throw SchemaError(join_path(path, key), "expected a string");
  return it->get<std::string>();
}

}  // namespace inpipe::detail
