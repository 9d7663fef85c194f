// Copyright 2026 The ddbm Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef DDBM_CONFIG_H_
#define DDBM_CONFIG_H_

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "ddbm/types.h"

namespace ddbm {

// Reads `key` from object `j` or returns `fallback` when absent. A present key
// of the wrong type throws ConfigError("<section>.<key>: ...").
template <typename T>
T GetOr(const nlohmann::json& j, const char* key, T fallback,
        const char* section) {
  if (!j.is_object()) {
    throw ConfigError(std::string(section) + ": expected an object");
  }
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string(section) + "." + key + ": " + e.what());
  }
}

// Returns root[name]; throws ConfigError naming the section when missing.
const nlohmann::json& RequireSection(const nlohmann::json& root,
                                     const std::string& name);

nlohmann::json ReadJsonFile(const std::filesystem::path& path);
void WriteTextFile(const std::filesystem::path& path, const std::string& text);

// Canonical form: keys sorted at every level, compact separators.
std::string CanonicalJson(const nlohmann::json& j);

// 16 hex digits of FNV-1a over the canonical form.
std::string ConfigHash(const nlohmann::json& j);

}  // namespace ddbm

#endif  // DDBM_CONFIG_H_
