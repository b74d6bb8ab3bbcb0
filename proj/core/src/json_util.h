#pragma once

#include <algorithm>
#include <initializer_list>
#include <string>
#include <string_view>

#include <Eigen/Core>

#include "anchorloc/errors.h"
#include "json.hpp"

namespace anchorloc::internal {

using nlohmann::json;

inline void RequireObject(const json& j, const std::string& where) {
  if (!j.is_object()) throw ValidationError(where + ": expected an object");
}

// Rejects keys outside `allowed`.
inline void CheckKeys(const json& j, std::initializer_list<std::string_view> allowed,
                      const std::string& where) {
  RequireObject(j, where);
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ValidationError(where + ": unknown key '" + key + "'");
    }
  }
}

template <typename T>
void Read(const json& j, const char* key, T* out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    *out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ValidationError(where + "." + key + ": wrong type");
  }
}

inline void ReadVec3(const json& j, const char* key, Eigen::Vector3d* out,
                     const std::string& where) {
  if (!j.contains(key)) return;
  const auto& v = j.at(key);
  if (v.is_number()) {
    out->setConstant(v.get<double>());
    return;
  }
  if (!v.is_array() || v.size() != 3 || !v[0].is_number() || !v[1].is_number() ||
      !v[2].is_number()) {
    throw ValidationError(where + "." + key + ": expected [x, y, z]");
  }
  *out = Eigen::Vector3d(v[0].get<double>(), v[1].get<double>(), v[2].get<double>());
}

inline json Vec3Json(const Eigen::Vector3d& v) { return json::array({v.x(), v.y(), v.z()}); }

}  // namespace anchorloc::internal
