// Copyright 2026 The ddbm Authors
// SPDX-License-Identifier: Apache-2.0

#include "ddbm/config.h"

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace ddbm {

const nlohmann::json& RequireSection(const nlohmann::json& root,
                                     const std::string& name) {
  auto it = root.find(name);
  if (it == root.end() || !it->is_object()) {
    throw ConfigError("missing required section '" + name + "'");
  }
  return *it;
}

nlohmann::json ReadJsonFile(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void WriteTextFile(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed for " + path.string());
}

std::string CanonicalJson(const nlohmann::json& j) {
  // nlohmann::json stores objects in a std::map, so dump() is key-sorted.
  return j.dump();
}

std::string ConfigHash(const nlohmann::json& j) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : CanonicalJson(j)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace ddbm
