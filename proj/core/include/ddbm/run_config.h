// Copyright 2026 The ddbm Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef DDBM_RUN_CONFIG_H_
#define DDBM_RUN_CONFIG_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

namespace ddbm {

enum class Task { kToy, kNav };

Task ParseTask(const std::string& name);
std::string ToString(Task task);

// Command-line values that take precedence over the config file.
struct RunOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output_dir;
  std::optional<int> steps;
};

inline constexpr const char* kOutputDirEnv = "DDBM_OUTPUT_DIR";

struct RunConfig {
  Task task = Task::kToy;
  nlohmann::json root;  // config with overrides applied
  std::uint64_t seed = 0;
  std::filesystem::path output_dir;
  std::string hash;  // of root without output_dir
};

// Applies overrides (flag > environment > config > default "out" for the
// output directory), then validates every section for the task. Throws
// ConfigError naming the offending field.
RunConfig ParseRunConfig(nlohmann::json root, const RunOverrides& overrides = {},
                         const char* env_output_dir = nullptr);

RunConfig LoadRunConfig(const std::filesystem::path& path,
                        const RunOverrides& overrides = {});

}  // namespace ddbm

#endif  // DDBM_RUN_CONFIG_H_
