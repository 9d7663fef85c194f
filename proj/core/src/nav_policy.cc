// Copyright 2026 The ddbm Authors
// SPDX-License-Identifier: Apache-2.0

#include "ddbm/nav_policy.h"

#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

#include "ddbm/config.h"
#include "ddbm/csv.h"
#include "ddbm/log.h"
#include "ddbm/parallel.h"
#include "ddbm/random.h"

namespace ddbm {
namespace {

// Layout seeds for evaluation live in their own stream so they never collide
// with the per-episode training seeds.
constexpr std::uint64_t kEvalStream = 0x6576616cULL;

}  // namespace

JointBatch ToJointBatch(const NavDataset& data, double action_scale) {
  JointBatch b;
  b.observations = data.observations;
  b.actions = data.actions / action_scale;
  b.decisions = data.decisions;
  b.lengths = data.lengths;
  b.steps = data.steps;
  return b;
}

NavPolicy MakeLearnedNavPolicy(const JointModel& model, const Vector& params,
                               bool bridge, const SamplerOptions& sampler,
                               double range_cap) {
  return [&model, &params, bridge, sampler, range_cap](
             const Observation& obs, const Pose&, std::uint64_t seed) {
    const Matrix features = obs.Features(range_cap);
    const Matrix context = model.Encode(params, features);
    Matrix action = model.SamplePrior(params, context, DeriveSeed(seed, 1));
    if (bridge) {
      const JointModel::Segment seg = model.denoiser_segment();
      const Vector den = params.segment(seg.offset, seg.size);
      const NetworkDenoiser denoiser(model.denoiser(), den, context);
      SamplerOptions options = sampler;
      options.seed = DeriveSeed(seed, 2);
      options.keep_trace = false;
      action = Sample(denoiser, model.denoiser().schedule(), action, options).final_state;
    }
    return ActionSequence(model.config().action_scale * action.col(0));
  };
}

std::vector<WorldLayout> EvaluationLayouts(int n, std::uint64_t seed,
                                           Difficulty difficulty,
                                           const WorldConfig& world) {
  std::vector<WorldLayout> layouts;
  layouts.reserve(static_cast<std::size_t>(std::max(n, 0)));
  for (int i = 0; i < n; ++i) {
    layouts.push_back(GenerateLayout(
        DeriveSeed(seed, kEvalStream, static_cast<std::uint64_t>(i)), difficulty, world));
  }
  return layouts;
}

std::vector<NavEvalRow> EvaluateNav(const std::vector<NavVariant>& variants,
                                    const std::vector<WorldLayout>& layouts,
                                    const RolloutConfig& rollout,
                                    const SamplerOptions& sampler,
                                    std::uint64_t seed, int threads) {
  std::vector<NavEvalRow> rows;
  for (const NavVariant& v : variants) {
    if (v.model == nullptr || v.params == nullptr) {
      throw Error("evaluate: variant '" + v.name + "' has no model");
    }
    const NavPolicy policy = MakeLearnedNavPolicy(*v.model, *v.params, v.bridge,
                                                  sampler, rollout.sensor.range_cap);
    std::vector<EpisodeMetrics> metrics(layouts.size());
    ParallelFor(layouts.size(), threads, [&](std::size_t i) {
      metrics[i] = Rollout(policy, layouts[i], rollout, DeriveSeed(seed, i));
    });
    NavEvalRow row;
    row.variant = v.name;
    row.prior = ToString(v.model->config().prior);
    row.stage = v.bridge ? "target" : "source";
    row.episodes = static_cast<int>(metrics.size());
    int successes = 0;
    double collisions = 0.0, sum = 0.0, sum2 = 0.0;
    for (const EpisodeMetrics& m : metrics) {
      collisions += m.collisions;
      if (m.success) {
        ++successes;
        sum += m.path_length;
        sum2 += m.path_length * m.path_length;
      }
    }
    if (!metrics.empty()) {
      row.success_rate = static_cast<double>(successes) / metrics.size();
      row.mean_collisions = collisions / metrics.size();
    }
    if (successes > 0) {
      row.mean_length = sum / successes;
      row.std_length = std::sqrt(std::max(0.0, sum2 / successes - row.mean_length * row.mean_length));
    }
    rows.push_back(row);
  }
  return rows;
}

std::string NavEvalCsv(const std::vector<NavEvalRow>& rows,
                       const std::string& config_hash) {
  CsvWriter csv({"variant", "prior", "stage", "episodes", "success_rate",
                 "mean_collisions", "mean_length", "std_length", "config_hash"});
  for (const NavEvalRow& r : rows) {
    csv.Row({r.variant, r.prior, r.stage, std::to_string(r.episodes),
             FormatDouble(r.success_rate), FormatDouble(r.mean_collisions),
             FormatDouble(r.mean_length), FormatDouble(r.std_length), config_hash});
  }
  return csv.str();
}

double PriorMinimalMse(const JointModel& model, const Vector& params,
                       const JointBatch& data, int contexts, int draws,
                       std::uint64_t seed) {
  if (contexts < 1 || draws < 1) throw DomainError("prior_minimal_mse: need >= 1 context and draw");
  Rng rng(seed);
  std::vector<Eigen::Index> index(static_cast<std::size_t>(contexts));
  for (Eigen::Index& k : index) {
    k = static_cast<Eigen::Index>(rng.Index(static_cast<std::size_t>(data.size())));
  }
  const JointBatch batch = SelectColumns(data, index);
  const Matrix context = model.Encode(params, batch.observations);
  const double scale = model.config().action_scale;
  Vector best = Vector::Constant(contexts, std::numeric_limits<double>::infinity());
  for (int d = 0; d < draws; ++d) {
    const Matrix aT = model.SamplePrior(params, context, DeriveSeed(seed, 1, static_cast<std::uint64_t>(d)));
    const Vector mse =
        (scale * scale) * (aT - batch.actions).colwise().squaredNorm().transpose() /
        static_cast<double>(aT.rows());
    best = best.cwiseMin(mse);
  }
  return best.mean();
}

void to_json(nlohmann::json& j, const NavExperimentConfig& c) {
  nlohmann::json priors = nlohmann::json::array();
  for (PriorKind p : c.priors) priors.push_back(ToString(p));
  j = nlohmann::json{
      {"seed", c.seed},
      {"schedule", c.schedule},
      {"model", c.model},
      {"trainer", c.trainer},
      {"optimizer", c.optimizer},
      {"loss_weights", c.weights},
      {"sampler", c.sampler},
      {"rollout", c.rollout},
      {"world", c.collect.world},
      {"expert", c.collect.expert},
      {"nav",
       {{"episodes", c.collect.episodes},
        {"execution_noise", c.collect.execution_noise},
        {"difficulty", ToString(c.collect.difficulty)}}},
      {"eval", {{"layouts", c.eval_layouts}, {"priors", priors}}}};
}

NavExperimentConfig NavExperimentConfigFromJson(const nlohmann::json& root) {
  NavExperimentConfig c;
  c.seed = GetOr(root, "seed", c.seed, "config");
  c.schedule = RequireSection(root, "schedule").get<ScheduleConfig>();
  if (root.contains("denoiser")) c.model.denoiser = root.at("denoiser").get<DenoiserConfig>();
  if (root.contains("model")) {
    const nlohmann::json& m = root.at("model");
    c.model.obs_dim = GetOr(m, "obs_dim", c.model.obs_dim, "model");
    c.model.encoder_hidden = GetOr(m, "encoder_hidden", c.model.encoder_hidden, "model");
    c.model.action_scale = GetOr(m, "action_scale", c.model.action_scale, "model");
    c.model.temporal_scale = GetOr(m, "temporal_scale", c.model.temporal_scale, "model");
  }
  if (root.contains("prior")) {
    const nlohmann::json& p = root.at("prior");
    c.model.prior = ParsePriorKind(GetOr<std::string>(p, "kind", ToString(c.model.prior), "prior"));
    c.model.parabolic = p.get<ParabolicPriorConfig>();
    if (p.contains("cvae")) c.model.cvae = p.at("cvae").get<CvaeConfig>();
  }
  // Re-validate the composed model section.
  c.model = nlohmann::json(c.model).get<JointConfig>();
  if (c.model.obs_dim != kObservationDim) {
    throw ConfigError("model.obs_dim must be " + std::to_string(kObservationDim));
  }
  if (root.contains("trainer")) c.trainer = root.at("trainer").get<TrainerConfig>();
  if (root.contains("optimizer")) c.optimizer = root.at("optimizer").get<AdamConfig>();
  if (root.contains("loss_weights")) c.weights = root.at("loss_weights").get<LossWeights>();
  if (root.contains("sampler")) c.sampler = root.at("sampler").get<SamplerOptions>();
  if (root.contains("rollout")) c.rollout = root.at("rollout").get<RolloutConfig>();
  if (root.contains("world")) c.collect.world = root.at("world").get<WorldConfig>();
  if (root.contains("expert")) c.collect.expert = root.at("expert").get<ExpertConfig>();
  if (2 * c.collect.expert.n_waypoints != c.model.denoiser.action_dim) {
    throw ConfigError("denoiser.action_dim must equal 2 * expert.n_waypoints");
  }
  if (root.contains("nav")) {
    const nlohmann::json& n = root.at("nav");
    c.collect.episodes = GetOr(n, "episodes", c.collect.episodes, "nav");
    c.collect.execution_noise = GetOr(n, "execution_noise", c.collect.execution_noise, "nav");
    c.collect.difficulty = ParseDifficulty(
        GetOr<std::string>(n, "difficulty", ToString(c.collect.difficulty), "nav"));
  }
  if (root.contains("eval")) {
    const nlohmann::json& e = root.at("eval");
    c.eval_layouts = GetOr(e, "layouts", c.eval_layouts, "eval");
    if (e.contains("priors")) {
      c.priors.clear();
      for (const auto& name : GetOr<std::vector<std::string>>(e, "priors", {}, "eval")) {
        c.priors.push_back(ParsePriorKind(name));
      }
    }
  }
  c.collect.rollout = c.rollout;
  if (c.collect.episodes < 1) throw ConfigError("nav.episodes must be >= 1");
  if (c.eval_layouts < 1) throw ConfigError("eval.layouts must be >= 1");
  return c;
}

JointModel MakeNavModel(const NavExperimentConfig& config, PriorKind prior) {
  JointConfig model = config.model;
  model.prior = prior;
  return JointModel(model, NoiseSchedule(config.schedule));
}

TrainedNavModel TrainNavModel(const NavExperimentConfig& config,
                              PriorKind prior, const JointBatch& data) {
  const JointModel model = MakeNavModel(config, prior);
  const auto kind = static_cast<std::uint64_t>(prior);
  TrainerConfig trainer = config.trainer;
  trainer.seed = DeriveSeed(config.seed, 20 + kind, config.trainer.seed);
  const Vector init = model.Init(DeriveSeed(config.seed, 30 + kind));
  JointTrainResult r =
      TrainJoint(model, data, trainer, config.optimizer, config.weights, init);
  TrainedNavModel out;
  out.prior = prior;
  out.params = std::move(r.params);
  out.metrics = std::move(r.metrics);
  return out;
}

NavExperimentResult RunNavExperiment(const NavExperimentConfig& config) {
  NavExperimentResult result;
  const NavDataset raw =
      CollectExpertData(config.collect, DeriveSeed(config.seed, 10), config.threads);
  const JointBatch data = ToJointBatch(raw, config.model.action_scale);
  result.dataset_size = data.size();
  LogInfo("nav: " + std::to_string(data.size()) + " expert samples");

  std::vector<JointModel> models;
  for (PriorKind prior : config.priors) {
    models.push_back(MakeNavModel(config, prior));
    result.models.push_back(TrainNavModel(config, prior, data));
    LogInfo("nav: trained " + ToString(prior) + " model");
  }
  std::vector<NavVariant> variants;
  for (std::size_t i = 0; i < models.size(); ++i) {
    const std::string name = ToString(config.priors[i]);
    variants.push_back({name + "_source", &models[i], &result.models[i].params, false});
    variants.push_back({name + "_target", &models[i], &result.models[i].params, true});
    result.prior_mse.push_back(PriorMinimalMse(models[i], result.models[i].params,
                                               data, 500, 8, DeriveSeed(config.seed, 40)));
  }
  const std::vector<WorldLayout> layouts =
      EvaluationLayouts(config.eval_layouts, config.seed, Difficulty::kCluttered,
                        config.collect.world);
  result.rows = EvaluateNav(variants, layouts, config.rollout, config.sampler,
                            DeriveSeed(config.seed, 50), config.threads);
  return result;
}

}  // namespace ddbm
