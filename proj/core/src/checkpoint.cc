// Copyright 2026 The ddbm Authors
// SPDX-License-Identifier: Apache-2.0

#include "ddbm/checkpoint.h"

#include <bit>
#include <cstdint>
#include <fstream>
#include <sstream>

#include "ddbm/config.h"

namespace ddbm {
namespace {

constexpr char kHex[] = "0123456789abcdef";

int HexValue(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

}  // namespace

std::string EncodeParams(const Vector& params) {
  std::string out;
  out.reserve(static_cast<std::size_t>(params.size()) * 16);
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(params[i]);
    for (int b = 0; b < 8; ++b, bits >>= 8) {
      out.push_back(kHex[(bits >> 4) & 0xf]);
      out.push_back(kHex[bits & 0xf]);
    }
  }
  return out;
}

Vector DecodeParams(const std::string& hex) {
  if (hex.size() % 16 != 0) throw CheckpointError("checkpoint: parameter blob has a partial value");
  Vector params(static_cast<Eigen::Index>(hex.size() / 16));
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    std::uint64_t bits = 0;
    for (int b = 7; b >= 0; --b) {
      const std::size_t at = static_cast<std::size_t>(i) * 16 + static_cast<std::size_t>(b) * 2;
      const int hi = HexValue(hex[at]);
      const int lo = HexValue(hex[at + 1]);
      if (hi < 0 || lo < 0) throw CheckpointError("checkpoint: invalid hex digit in parameters");
      bits = (bits << 8) | static_cast<std::uint64_t>(hi * 16 + lo);
    }
    params[i] = std::bit_cast<double>(bits);
  }
  return params;
}

nlohmann::json CheckpointToJson(const Checkpoint& c) {
  return nlohmann::json{{"format_version", c.format_version},
                        {"task", c.task},
                        {"architecture", c.architecture},
                        {"schedule", c.schedule},
                        {"config_hash", c.config_hash},
                        {"extra", c.extra},
                        {"param_count", c.params.size()},
                        {"params", EncodeParams(c.params)}};
}

Checkpoint CheckpointFromJson(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("format_version")) {
    throw CheckpointError("checkpoint: missing format_version");
  }
  Checkpoint c;
  try {
    c.format_version = j.at("format_version").get<int>();
    if (c.format_version != kCheckpointVersion) {
      throw CheckpointError("checkpoint: format_version " +
                            std::to_string(c.format_version) + " is not supported (expected " +
                            std::to_string(kCheckpointVersion) + ")");
    }
    c.task = j.at("task").get<std::string>();
    c.architecture = j.at("architecture");
    c.schedule = j.at("schedule").get<ScheduleConfig>();
    c.config_hash = j.value("config_hash", std::string());
    c.extra = j.value("extra", nlohmann::json::object());
    c.params = DecodeParams(j.at("params").get<std::string>());
    if (c.params.size() != j.at("param_count").get<Eigen::Index>()) {
      throw CheckpointError("checkpoint: param_count does not match the parameter blob");
    }
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("checkpoint: ") + e.what());
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("checkpoint: ") + e.what());
  }
  return c;
}

void SaveCheckpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  WriteTextFile(path, CheckpointToJson(checkpoint).dump(1) + "\n");
}

Checkpoint LoadCheckpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CheckpointError("checkpoint: cannot open " + path.string());
  std::stringstream text;
  text << in.rdbuf();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text.str());
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError("checkpoint: " + path.string() + ": " + e.what());
  }
  return CheckpointFromJson(j);
}

}  // namespace ddbm
