// Copyright 2026 The ddbm Authors
// SPDX-License-Identifier: Apache-2.0

#include <filesystem>
#include <string>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "ddbm/config.h"
#include "ddbm/run_config.h"

namespace ddbm {
namespace {

nlohmann::json QuickToy() { return ReadJsonFile(std::filesystem::path(DDBM_CONFIG_DIR) / "toy_quick.json"); }

std::string ErrorOf(const nlohmann::json& j) {
  try {
    ParseRunConfig(j);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

TEST(RunConfig, MissingScheduleNamesField) {
  nlohmann::json j = QuickToy();
  j.erase("schedule");
  EXPECT_NE(ErrorOf(j).find("schedule"), std::string::npos);
}

TEST(RunConfig, MissingOrUnknownTask) {
  nlohmann::json j = QuickToy();
  j.erase("task");
  EXPECT_NE(ErrorOf(j).find("task"), std::string::npos);
  j["task"] = "juggling";
  EXPECT_NE(ErrorOf(j).find("task"), std::string::npos);
  EXPECT_NE(ErrorOf(nlohmann::json::array()), "");
}

TEST(RunConfig, WrongTypeNamesField) {
  nlohmann::json j = QuickToy();
  j["trainer"]["steps"] = "many";
  EXPECT_NE(ErrorOf(j).find("trainer.steps"), std::string::npos);
  j = QuickToy();
  j["optimizer"]["lr"] = -1.0;
  EXPECT_NE(ErrorOf(j).find("lr"), std::string::npos);
}

TEST(RunConfig, HashIgnoresKeyOrderAndOutputDir) {
  const nlohmann::json a = nlohmann::json::parse(R"({"task":"toy","schedule":{"kind":"VE","T":1.0},"seed":3})");
  const nlohmann::json b = nlohmann::json::parse(R"({"seed":3,"schedule":{"T":1.0,"kind":"VE"},"task":"toy","output_dir":"x"})");
  EXPECT_EQ(ParseRunConfig(a).hash, ParseRunConfig(b).hash);
  EXPECT_EQ(ConfigHash(a).size(), 16u);
  nlohmann::json c = a;
  c["seed"] = 4;
  EXPECT_NE(ParseRunConfig(a).hash, ParseRunConfig(c).hash);
}

TEST(RunConfig, OutputDirPrecedence) {
  nlohmann::json j = QuickToy();
  EXPECT_EQ(ParseRunConfig(j).output_dir, "out");
  j["output_dir"] = "from_config";
  EXPECT_EQ(ParseRunConfig(j).output_dir, "from_config");
  EXPECT_EQ(ParseRunConfig(j, {}, "from_env").output_dir, "from_env");
  RunOverrides o;
  o.output_dir = "from_flag";
  EXPECT_EQ(ParseRunConfig(j, o, "from_env").output_dir, "from_flag");
}

TEST(RunConfig, OverridesApply) {
  RunOverrides o;
  o.seed = 99;
  o.steps = 12;
  const RunConfig rc = ParseRunConfig(QuickToy(), o);
  EXPECT_EQ(rc.seed, 99u);
  EXPECT_EQ(rc.root["trainer"]["steps"], 12);
  EXPECT_NE(rc.hash, ParseRunConfig(QuickToy()).hash);
}

TEST(RunConfig, ShippedConfigsParse) {
  int n = 0;
  for (const auto& entry : std::filesystem::directory_iterator(DDBM_CONFIG_DIR)) {
    if (entry.path().extension() != ".json") continue;
    EXPECT_NO_THROW(LoadRunConfig(entry.path())) << entry.path();
    ++n;
  }
  EXPECT_GE(n, 4);
}

TEST(RunConfig, CanonicalJsonSortsKeys) {
  const nlohmann::json j = nlohmann::json::parse(R"({"b":1,"a":{"d":2,"c":3}})");
  EXPECT_EQ(CanonicalJson(j), R"({"a":{"c":3,"d":2},"b":1})");
}

}  // namespace
}  // namespace ddbm
