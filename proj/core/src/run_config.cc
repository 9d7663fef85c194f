// Copyright 2026 The ddbm Authors
// SPDX-License-Identifier: Apache-2.0

#include "ddbm/run_config.h"

#include <cstdlib>

#include "ddbm/config.h"
#include "ddbm/nav_policy.h"
#include "ddbm/toybench.h"
#include "ddbm/types.h"

namespace ddbm {

Task ParseTask(const std::string& name) {
  if (name == "toy" || name == "Toy") return Task::kToy;
  if (name == "nav" || name == "Nav") return Task::kNav;
  throw ConfigError("task: unknown task '" + name + "' (expected toy or nav)");
}

std::string ToString(Task task) { return task == Task::kToy ? "toy" : "nav"; }

RunConfig ParseRunConfig(nlohmann::json root, const RunOverrides& overrides,
                         const char* env_output_dir) {
  if (!root.is_object()) throw ConfigError("config: expected a JSON object");
  if (!root.contains("task")) throw ConfigError("missing required field 'task'");
  RunConfig rc;
  rc.task = ParseTask(GetOr<std::string>(root, "task", "", "config"));
  RequireSection(root, "schedule");
  if (overrides.seed) root["seed"] = *overrides.seed;
  if (overrides.steps) root["trainer"]["steps"] = *overrides.steps;

  std::string out = GetOr<std::string>(root, "output_dir", "out", "config");
  if (env_output_dir != nullptr && *env_output_dir != '\0') out = env_output_dir;
  if (overrides.output_dir) out = *overrides.output_dir;
  root.erase("output_dir");

  rc.seed = GetOr<std::uint64_t>(root, "seed", 0, "config");
  if (rc.task == Task::kToy) {
    ToyConfigFromJson(root);
  } else {
    NavExperimentConfigFromJson(root);
  }
  rc.root = std::move(root);
  rc.output_dir = out;
  rc.hash = ConfigHash(rc.root);
  return rc;
}

RunConfig LoadRunConfig(const std::filesystem::path& path,
                        const RunOverrides& overrides) {
  return ParseRunConfig(ReadJsonFile(path), overrides, std::getenv(kOutputDirEnv));
}

}  // namespace ddbm
