#pragma once

#include <string>
#include <utility>

#include "json.hpp"
#include "pasa/error.hpp"

// Like NLOHMANN_JSON_SERIALIZE_ENUM, but an unknown string raises
// ArgumentError listing the valid names instead of mapping to the first
// enumerator.
#define PASA_JSON_ENUM(ENUM_TYPE, ...)                                                              \
  inline const auto& ENUM_TYPE##_json_names() {                                                     \
    static const std::pair<ENUM_TYPE, const char*> table[] = __VA_ARGS__;                           \
    return table;                                                                                   \
  }                                                                                                 \
  inline void to_json(nlohmann::json& j, const ENUM_TYPE& e) {                                      \
    for (const auto& [k, v] : ENUM_TYPE##_json_names()) {                                           \
      if (k == e) {                                                                                 \
        j = v;                                                                                      \
        return;                                                                                     \
      }                                                                                             \
    }                                                                                               \
    j = nullptr;                                                                                    \
  }                                                                                                 \
  inline void from_json(const nlohmann::json& j, ENUM_TYPE& e) {                                    \
    std::string valid;                                                                              \
    for (const auto& [k, v] : ENUM_TYPE##_json_names()) {                                           \
      if (j.is_string() && j.get_ref<const std::string&>() == v) {                                  \
        e = k;                                                                                      \
        return;                                                                                     \
      }                                                                                             \
      valid += (valid.empty() ? "" : ", ") + std::string(v);                                        \
    }                                                                                               \
    throw ::pasa::ArgumentError("unknown " #ENUM_TYPE " " + j.dump() + " (valid: " + valid + ")"); \
  }
