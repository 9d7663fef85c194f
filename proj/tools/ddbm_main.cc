// Copyright 2026 The ddbm Authors
// SPDX-License-Identifier: Apache-2.0

// ddbm command-line tool: train, sample, eval-toy, eval-nav, prior-dump.

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ddbm/checkpoint.h"
#include "ddbm/config.h"
#include "ddbm/csv.h"
#include "ddbm/log.h"
#include "ddbm/nav_policy.h"
#include "ddbm/priors.h"
#include "ddbm/random.h"
#include "ddbm/run_config.h"
#include "ddbm/sampler.h"
#include "ddbm/toybench.h"

#ifndef DDBM_VERSION
#define DDBM_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;

namespace ddbm {
namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct GlobalOptions {
  int threads = 1;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  bool verbose = false;
};

std::string UtcTimestamp() {
  const std::time_t now =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Run metadata lives next to the outputs; it is the only file with a
// timestamp.
void WriteRunMetadata(const fs::path& dir, const std::string& command,
                      const std::string& hash, std::uint64_t seed,
                      const std::vector<std::string>& outputs) {
  const nlohmann::json j{{"command", command},
                         {"config_hash", hash},
                         {"seed", seed},
                         {"timestamp", UtcTimestamp()},
                         {"version", std::string("ddbm ") + DDBM_VERSION},
                         {"outputs", outputs}};
  WriteTextFile(dir / ("run_" + command + ".json"), j.dump(2) + "\n");
}

RunOverrides MakeOverrides(const GlobalOptions& g, std::optional<int> steps = {}) {
  RunOverrides o;
  o.seed = g.seed;
  o.output_dir = g.out;
  o.steps = steps;
  return o;
}

fs::path OutputDir(const GlobalOptions& g) {
  if (g.out) return *g.out;
  if (const char* env = std::getenv(kOutputDirEnv); env != nullptr && *env != '\0') {
    return env;
  }
  return "out";
}

int CmdTrain(const GlobalOptions& g, const std::string& config_path,
             std::optional<int> steps) {
  const RunConfig rc = LoadRunConfig(config_path, MakeOverrides(g, steps));
  Checkpoint ck;
  ck.config_hash = rc.hash;
  std::vector<MetricsRow> metrics;
  if (rc.task == Task::kToy) {
    const ToyConfig config = ToyConfigFromJson(rc.root);
    TrainedToyBridge bridge = TrainToyBridge(config);
    ck.task = "toy";
    ck.architecture = config;
    ck.schedule = config.schedule;
    ck.params = std::move(bridge.params);
    metrics = std::move(bridge.metrics);
  } else {
    NavExperimentConfig config = NavExperimentConfigFromJson(rc.root);
    config.threads = g.threads;
    const NavDataset raw =
        CollectExpertData(config.collect, DeriveSeed(config.seed, 10), config.threads);
    TrainedNavModel model = TrainNavModel(
        config, config.model.prior, ToJointBatch(raw, config.model.action_scale));
    JointConfig arch = config.model;
    ck.task = "nav";
    ck.architecture = arch;
    ck.schedule = config.schedule;
    ck.params = std::move(model.params);
    metrics = std::move(model.metrics);
  }
  const fs::path dir = rc.output_dir;
  SaveCheckpoint(ck, dir / "checkpoint.json");
  WriteTextFile(dir / "metrics.csv", MetricsCsv(metrics, rc.hash));
  WriteRunMetadata(dir, "train", rc.hash, rc.seed, {"checkpoint.json", "metrics.csv"});
  std::cout << "wrote " << (dir / "checkpoint.json").string() << " and "
            << (dir / "metrics.csv").string() << "\n";
  return 0;
}

// Context for nav sampling: the start observation of a held-out layout.
Matrix NavStartContext(const JointModel& model, const Vector& params,
                       std::uint64_t seed) {
  const WorldLayout world = EvaluationLayouts(1, seed, Difficulty::kCluttered).front();
  const Observation obs = Observe(world, world.start, {});
  return model.Encode(params, obs.Features());
}

int CmdSample(const GlobalOptions& g, const std::string& checkpoint_path, int k,
              const std::string& mode_name, int n) {
  if (k < 1) throw ConfigError("sample.k must be >= 1");
  if (n < 1) throw ConfigError("sample.n must be >= 1");
  const SampleMode mode = ParseSampleMode(mode_name);
  const Checkpoint ck = LoadCheckpoint(checkpoint_path);
  const std::uint64_t seed = g.seed.value_or(0);
  SampleResult result;
  if (ck.task == "toy") {
    const ToyConfig config = ToyConfigFromJson(ck.architecture);
    const NoiseSchedule schedule(ck.schedule);
    const BridgeDenoiser model(config.denoiser, schedule);
    if (ck.params.size() != model.parameter_count()) {
      throw CheckpointError("checkpoint: parameter count does not match the architecture");
    }
    const NetworkDenoiser denoiser(model, ck.params, Matrix(0, 1));
    const DatasetPair pair =
        MakeDataset(config.generator, config.offset, std::max<Eigen::Index>(n, 64),
                    DeriveSeed(seed, 60));
    SamplerOptions opts = config.sampler;
    opts.steps = k;
    opts.mode = mode;
    opts.seed = DeriveSeed(seed, 61);
    opts.keep_trace = true;
    result = Sample(denoiser, schedule, pair.source.points.leftCols(n) / config.data_scale, opts);
    for (Matrix& frame : result.trace) frame *= config.data_scale;
  } else if (ck.task == "nav") {
    const JointConfig arch = ck.architecture.get<JointConfig>();
    const JointModel model(arch, NoiseSchedule(ck.schedule));
    if (ck.params.size() != model.parameter_count()) {
      throw CheckpointError("checkpoint: parameter count does not match the architecture");
    }
    const Matrix context = NavStartContext(model, ck.params, seed).replicate(1, n);
    const Matrix aT = model.SamplePrior(ck.params, context, DeriveSeed(seed, 62));
    const JointModel::Segment seg = model.denoiser_segment();
    const Vector den = ck.params.segment(seg.offset, seg.size);
    const NetworkDenoiser denoiser(model.denoiser(), den, context);
    SamplerOptions opts;
    opts.steps = k;
    opts.mode = mode;
    opts.seed = DeriveSeed(seed, 61);
    result = Sample(denoiser, model.denoiser().schedule(), aT, opts);
    for (Matrix& frame : result.trace) frame *= arch.action_scale;
  } else {
    throw CheckpointError("checkpoint: unknown task '" + ck.task + "'");
  }
  const fs::path dir = OutputDir(g);
  WriteTextFile(dir / "trace.csv", TraceCsv(result, ck.config_hash));
  WriteRunMetadata(dir, "sample", ck.config_hash, seed, {"trace.csv"});
  std::cout << "wrote " << (dir / "trace.csv").string() << "\n";
  return 0;
}

std::vector<int> IntList(const nlohmann::json& section, const char* key,
                         std::vector<int> fallback) {
  return GetOr(section, key, fallback, "eval");
}

int CmdEvalToy(const GlobalOptions& g, const std::string& config_path,
               const std::string& checkpoint_path) {
  const RunConfig rc = LoadRunConfig(config_path, MakeOverrides(g));
  if (rc.task != Task::kToy) throw ConfigError("task: eval-toy needs task = toy");
  const ToyConfig base = ToyConfigFromJson(rc.root);
  const nlohmann::json eval = rc.root.value("eval", nlohmann::json::object());
  const std::vector<int> ks = IntList(eval, "k", {base.sampler.steps});
  const SampleMode mode = base.sampler.mode;
  std::vector<TranslationMetrics> rows;
  if (!checkpoint_path.empty()) {
    const Checkpoint ck = LoadCheckpoint(checkpoint_path);
    if (ck.task != "toy") throw CheckpointError("checkpoint: expected a toy checkpoint");
    const TrainedToyBridge bridge =
        RestoreToyBridge(ToyConfigFromJson(ck.architecture), ck.params);
    for (int k : ks) rows.push_back(EvaluateToy(bridge, k, mode));
  } else {
    const std::vector<double> offsets =
        GetOr(eval, "offsets", std::vector<double>{base.offset}, "eval");
    const std::vector<std::uint64_t> seeds =
        GetOr(eval, "seeds", std::vector<std::uint64_t>{base.seed}, "eval");
    for (std::uint64_t seed : seeds) {
      for (double offset : offsets) {
        ToyConfig c = base;
        c.seed = seed;
        c.offset = offset;
        const TrainedToyBridge bridge = TrainToyBridge(c);
        for (int k : ks) rows.push_back(EvaluateToy(bridge, k, mode));
      }
    }
  }
  const fs::path dir = rc.output_dir;
  WriteTextFile(dir / "translation.csv", TranslationCsv(rows, rc.hash));
  WriteRunMetadata(dir, "eval-toy", rc.hash, rc.seed, {"translation.csv"});
  std::cout << TranslationCsv(rows, rc.hash);
  return 0;
}

int CmdEvalNav(const GlobalOptions& g, const std::string& config_path,
               const std::vector<std::string>& checkpoints) {
  const RunConfig rc = LoadRunConfig(config_path, MakeOverrides(g));
  if (rc.task != Task::kNav) throw ConfigError("task: eval-nav needs task = nav");
  NavExperimentConfig config = NavExperimentConfigFromJson(rc.root);
  config.threads = g.threads;
  std::vector<NavEvalRow> rows;
  if (checkpoints.empty()) {
    rows = RunNavExperiment(config).rows;
  } else {
    std::vector<JointModel> models;
    std::vector<Vector> params;
    models.reserve(checkpoints.size());
    params.reserve(checkpoints.size());
    for (const std::string& path : checkpoints) {
      const Checkpoint ck = LoadCheckpoint(path);
      if (ck.task != "nav") throw CheckpointError("checkpoint: " + path + " is not a nav checkpoint");
      models.emplace_back(ck.architecture.get<JointConfig>(), NoiseSchedule(ck.schedule));
      if (ck.params.size() != models.back().parameter_count()) {
        throw CheckpointError("checkpoint: " + path + " does not match its architecture");
      }
      params.push_back(ck.params);
    }
    std::vector<NavVariant> variants;
    for (std::size_t i = 0; i < models.size(); ++i) {
      const std::string name = ToString(models[i].config().prior);
      variants.push_back({name + "_source", &models[i], &params[i], false});
      variants.push_back({name + "_target", &models[i], &params[i], true});
    }
    const std::vector<WorldLayout> layouts = EvaluationLayouts(
        config.eval_layouts, config.seed, Difficulty::kCluttered, config.collect.world);
    rows = EvaluateNav(variants, layouts, config.rollout, config.sampler,
                       DeriveSeed(config.seed, 50), config.threads);
  }
  const fs::path dir = rc.output_dir;
  WriteTextFile(dir / "nav_eval.csv", NavEvalCsv(rows, rc.hash));
  WriteRunMetadata(dir, "eval-nav", rc.hash, rc.seed, {"nav_eval.csv"});
  std::cout << NavEvalCsv(rows, rc.hash);
  return 0;
}

// Parabolic prior draws for synthetic rule outputs cycling through the
// decisions, or the prior of a nav checkpoint at held-out start states.
int CmdPriorDump(const GlobalOptions& g, int n, const std::string& checkpoint_path,
                 double length) {
  if (n < 1) throw ConfigError("prior-dump.n must be >= 1");
  const std::uint64_t seed = g.seed.value_or(0);
  CsvWriter csv({"sample", "decision", "waypoint", "x", "y", "config_hash"});
  std::string hash = "parabolic";
  if (checkpoint_path.empty()) {
    Rng rng(seed);
    for (int s = 0; s < n; ++s) {
      RuleHeadOutput rule;
      rule.decision = static_cast<Decision>(s % kNumDecisions);
      rule.length = length;
      rule.confidence = rng.Uniform();
      const ActionSequence a = SampleParabolicPrior(rule, DeriveSeed(seed, 1, s), 8);
      for (int w = 0; w < 8; ++w) {
        csv.Row({std::to_string(s), std::to_string(static_cast<int>(rule.decision)),
                 std::to_string(w), FormatDouble(a[2 * w]), FormatDouble(a[2 * w + 1]), hash});
      }
    }
  } else {
    const Checkpoint ck = LoadCheckpoint(checkpoint_path);
    if (ck.task != "nav") throw CheckpointError("checkpoint: prior-dump needs a nav checkpoint");
    hash = ck.config_hash;
    const JointConfig arch = ck.architecture.get<JointConfig>();
    const JointModel model(arch, NoiseSchedule(ck.schedule));
    if (ck.params.size() != model.parameter_count()) {
      throw CheckpointError("checkpoint: parameter count does not match the architecture");
    }
    const Matrix context = NavStartContext(model, ck.params, seed).replicate(1, n);
    const Matrix a = arch.action_scale * model.SamplePrior(ck.params, context, DeriveSeed(seed, 1));
    for (int s = 0; s < n; ++s) {
      const Decision d = ClassifyHeading(HeadingOf(a.col(s).tail<2>()));
      for (int w = 0; w < a.rows() / 2; ++w) {
        csv.Row({std::to_string(s), std::to_string(static_cast<int>(d)), std::to_string(w),
                 FormatDouble(a(2 * w, s)), FormatDouble(a(2 * w + 1, s)), hash});
      }
    }
  }
  const fs::path dir = OutputDir(g);
  WriteTextFile(dir / "prior.csv", csv.str());
  WriteRunMetadata(dir, "prior-dump", hash, seed, {"prior.csv"});
  std::cout << "wrote " << (dir / "prior.csv").string() << "\n";
  return 0;
}

}  // namespace
}  // namespace ddbm

int main(int argc, char** argv) {
  using namespace ddbm;
  CLI::App app{"Diffusion bridge policies: training, sampling and evaluation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("ddbm ") + DDBM_VERSION);

  GlobalOptions g;
  app.add_option("--threads", g.threads, "Worker thread cap")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  app.add_option("--seed", g.seed, "Override the config seed");
  app.add_option("--out", g.out, "Output directory (overrides $DDBM_OUTPUT_DIR)");
  app.add_flag("-v,--verbose", g.verbose, "Log progress to stderr");

  std::string config_path;
  std::string checkpoint_path;
  std::optional<int> steps;
  int k = 10;
  std::string mode = "ode";
  int n = 1;
  std::vector<std::string> checkpoints;
  double length = 2.0;

  CLI::App* train = app.add_subcommand("train", "Train a model and write a checkpoint");
  train->add_option("config", config_path, "Run config (JSON)")->required();
  train->add_option("--steps", steps, "Override trainer.steps");

  CLI::App* sample = app.add_subcommand("sample", "Write a sampler trace from a checkpoint");
  sample->add_option("checkpoint", checkpoint_path, "Checkpoint file")->required();
  sample->add_option("-k,--steps", k, "Sampling steps")->capture_default_str();
  sample->add_option("--mode", mode, "ode or sde")->capture_default_str();
  sample->add_option("-n,--samples", n, "Number of samples")->capture_default_str();

  CLI::App* eval_toy = app.add_subcommand("eval-toy", "Toy translation metrics");
  eval_toy->add_option("config", config_path, "Run config (JSON)")->required();
  eval_toy->add_option("--checkpoint", checkpoint_path, "Evaluate this checkpoint instead of training");

  CLI::App* eval_nav = app.add_subcommand("eval-nav", "Navigation comparison table");
  eval_nav->add_option("config", config_path, "Run config (JSON)")->required();
  eval_nav->add_option("--checkpoint", checkpoints, "Nav checkpoint(s); trains all priors when omitted");

  CLI::App* prior_dump = app.add_subcommand("prior-dump", "Dump prior samples as CSV");
  prior_dump->add_option("-n,--samples", n, "Number of samples")->capture_default_str();
  prior_dump->add_option("--checkpoint", checkpoint_path, "Nav checkpoint whose prior to sample");
  prior_dump->add_option("--length", length, "Rule length for synthetic draws")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }
  SetLogLevel(g.verbose ? LogLevel::kInfo : LogLevel::kWarning);

  try {
    if (*train) return CmdTrain(g, config_path, steps);
    if (*sample) return CmdSample(g, checkpoint_path, k, mode, n);
    if (*eval_toy) return CmdEvalToy(g, config_path, checkpoint_path);
    if (*eval_nav) return CmdEvalNav(g, config_path, checkpoints);
    if (*prior_dump) return CmdPriorDump(g, n, checkpoint_path, length);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitRuntime;
}
