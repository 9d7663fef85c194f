// Copyright 2026 The ddbm Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef DDBM_CHECKPOINT_H_
#define DDBM_CHECKPOINT_H_

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "ddbm/schedule.h"
#include "ddbm/types.h"

namespace ddbm {

inline constexpr int kCheckpointVersion = 1;

// Unreadable, malformed or version-mismatched checkpoint.
class CheckpointError : public Error {
 public:
  using Error::Error;
};

// JSON document; parameters are stored as little-endian IEEE-754 doubles in
// hex so that a save/load round trip is bit exact.
struct Checkpoint {
  int format_version = kCheckpointVersion;
  std::string task;              // "toy" or "nav"
  nlohmann::json architecture;   // task-specific model description
  ScheduleConfig schedule;
  std::string config_hash;
  nlohmann::json extra = nlohmann::json::object();
  Vector params;
};

std::string EncodeParams(const Vector& params);
Vector DecodeParams(const std::string& hex);

nlohmann::json CheckpointToJson(const Checkpoint& checkpoint);
Checkpoint CheckpointFromJson(const nlohmann::json& j);

void SaveCheckpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint LoadCheckpoint(const std::filesystem::path& path);

}  // namespace ddbm

#endif  // DDBM_CHECKPOINT_H_
