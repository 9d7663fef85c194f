// Copyright 2026 The ddbm Authors
// SPDX-License-Identifier: Apache-2.0

#include "ddbm/toybench.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include <Eigen/Cholesky>
#include <nlohmann/json.hpp>

#include "ddbm/config.h"
#include "ddbm/csv.h"
#include "ddbm/random.h"

namespace ddbm {
namespace {

constexpr Eigen::Index kMaxEmdPoints = 1024;

Matrix EightGaussians(Eigen::Index n, Rng& rng) {
  Matrix p(2, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(i % 8) / 8.0;
    p(0, i) = 4.0 * std::cos(angle) + 0.3 * rng.Normal();
    p(1, i) = 4.0 * std::sin(angle) + 0.3 * rng.Normal();
  }
  return p;
}

Matrix TwoMoons(Eigen::Index n, Rng& rng) {
  Matrix p(2, n);
  const Eigen::Index upper = (n + 1) / 2;
  const Eigen::Index lower = n - upper;
  for (Eigen::Index i = 0; i < n; ++i) {
    const bool up = i < upper;
    const Eigen::Index k = up ? i : i - upper;
    const Eigen::Index count = up ? upper : lower;
    const double s = count > 1 ? static_cast<double>(k) / (count - 1) : 0.0;
    const double a = std::numbers::pi * s;
    if (up) {
      p(0, i) = std::cos(a);
      p(1, i) = std::sin(a);
    } else {
      p(0, i) = 1.0 - std::cos(a);
      p(1, i) = 0.5 - std::sin(a);
    }
    p(0, i) += 0.1 * rng.Normal();
    p(1, i) += 0.1 * rng.Normal();
  }
  return p;
}

Matrix IsotropicGaussian(Eigen::Index n, double offset, double std, Rng& rng) {
  Matrix p = std * rng.NormalMatrix(2, n);
  p.row(0).array() += offset;
  return p;
}

Matrix PairwiseDistances(const Matrix& a, const Matrix& b, bool squared) {
  Matrix c(a.cols(), b.cols());
  for (Eigen::Index j = 0; j < b.cols(); ++j) {
    for (Eigen::Index i = 0; i < a.cols(); ++i) {
      const double d2 = (a.col(i) - b.col(j)).squaredNorm();
      c(i, j) = squared ? d2 : std::sqrt(d2);
    }
  }
  return c;
}

void CheckClouds(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw ShapeError("emd: unequal point counts");
  if (a.rows() != b.rows()) throw ShapeError("emd: unequal dimensions");
  if (a.cols() > kMaxEmdPoints) throw DomainError("emd: at most 1024 points");
}

std::vector<double> Ranks(const std::vector<double>& x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

Generator ParseGenerator(const std::string& name) {
  if (name == "EightGaussians") return Generator::kEightGaussians;
  if (name == "TwoMoons") return Generator::kTwoMoons;
  if (name == "ShiftedClusters") return Generator::kShiftedClusters;
  throw ConfigError("toy.generator: unknown generator '" + name + "'");
}

std::string ToString(Generator g) {
  switch (g) {
    case Generator::kEightGaussians: return "EightGaussians";
    case Generator::kTwoMoons: return "TwoMoons";
    case Generator::kShiftedClusters: return "ShiftedClusters";
  }
  return "unknown";
}

DatasetPair MakeDataset(Generator generator, double offset, Eigen::Index n,
                        std::uint64_t seed) {
  if (n < 64) throw DomainError("make_2d_dataset: n must be >= 64");
  Rng target_rng(DeriveSeed(seed, 11));
  Rng source_rng(DeriveSeed(seed, 12));
  DatasetPair d;
  switch (generator) {
    case Generator::kEightGaussians:
      d.target.points = EightGaussians(n, target_rng);
      d.source.points = IsotropicGaussian(n, offset, 2.0, source_rng);
      break;
    case Generator::kTwoMoons:
      d.target.points = TwoMoons(n, target_rng);
      d.source.points = IsotropicGaussian(n, offset, 1.0, source_rng);
      break;
    case Generator::kShiftedClusters:
      d.target.points = EightGaussians(n, target_rng);
      d.source.points = EightGaussians(n, source_rng);
      d.source.points.row(0).array() += offset;
      break;
  }
  for (PointCloud2D* c : {&d.source, &d.target}) {
    c->name = ToString(generator);
    c->offset = offset;
    c->seed = seed;
  }
  d.source.name += "/source";
  d.target.name += "/target";
  return d;
}

std::vector<int> SolveAssignment(const Matrix& cost) {
  const auto n = static_cast<int>(cost.rows());
  if (cost.cols() != n) throw ShapeError("assignment: cost matrix must be square");
  if (n == 0) return {};
  // Row-major copy so the inner loop over columns is contiguous.
  std::vector<double> a(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) a[static_cast<std::size_t>(i) * n + j] = cost(i, j);
  }
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      const double* row = &a[static_cast<std::size_t>(i0 - 1) * n];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = row[j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> col(n);
  for (int j = 1; j <= n; ++j) col[p[j] - 1] = j - 1;
  return col;
}

double EmdPoints(const Matrix& a, const Matrix& b) {
  CheckClouds(a, b);
  if (a.cols() == 0) return 0.0;
  const Matrix c = PairwiseDistances(a, b, false);
  const std::vector<int> col = SolveAssignment(c);
  double total = 0.0;
  for (Eigen::Index i = 0; i < a.cols(); ++i) total += c(i, col[static_cast<std::size_t>(i)]);
  return total / static_cast<double>(a.cols());
}

double Emd(const PointCloud2D& a, const PointCloud2D& b) {
  return EmdPoints(a.points, b.points);
}

double MatchedSquaredError(const Matrix& a, const Matrix& b) {
  CheckClouds(a, b);
  if (a.cols() == 0) return 0.0;
  const Matrix c = PairwiseDistances(a, b, true);
  const std::vector<int> col = SolveAssignment(c);
  double total = 0.0;
  for (Eigen::Index i = 0; i < a.cols(); ++i) total += c(i, col[static_cast<std::size_t>(i)]);
  return total / static_cast<double>(a.cols());
}

Matrix OtPairTargets(const Matrix& source, const Matrix& target) {
  CheckClouds(source, target);
  const std::vector<int> col = SolveAssignment(PairwiseDistances(source, target, true));
  Matrix paired(target.rows(), target.cols());
  for (Eigen::Index i = 0; i < source.cols(); ++i) {
    paired.col(i) = target.col(col[static_cast<std::size_t>(i)]);
  }
  return paired;
}

double KlGaussian(const Vector& mu1, const Matrix& s1, const Vector& mu2,
                  const Matrix& s2) {
  const Eigen::Index k = mu1.size();
  if (mu2.size() != k || s1.rows() != k || s1.cols() != k || s2.rows() != k ||
      s2.cols() != k) {
    throw ShapeError("kl_gaussian: dimension mismatch");
  }
  auto check = [](const Matrix& s) {
    if (!s.isApprox(s.transpose(), 1e-12)) throw DomainError("kl_gaussian: covariance not symmetric");
    Eigen::LLT<Matrix> llt(s);
    if (llt.info() != Eigen::Success) throw DomainError("kl_gaussian: covariance not positive definite");
    return llt;
  };
  const Eigen::LLT<Matrix> l1 = check(s1);
  const Eigen::LLT<Matrix> l2 = check(s2);
  const Vector diff = mu2 - mu1;
  const double trace = l2.solve(s1).trace();
  const double quad = diff.dot(l2.solve(diff));
  const double logdet1 = 2.0 * l1.matrixL().toDenseMatrix().diagonal().array().log().sum();
  const double logdet2 = 2.0 * l2.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return 0.5 * (trace + quad - static_cast<double>(k) + logdet2 - logdet1);
}

double Pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw DomainError("pearson: need >= 2 pairs");
  const auto n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

double Spearman(const std::vector<double>& x, const std::vector<double>& y) {
  return Pearson(Ranks(x), Ranks(y));
}

Pairing ParsePairing(const std::string& name) {
  if (name == "independent") return Pairing::kIndependent;
  if (name == "ot") return Pairing::kOt;
  throw ConfigError("toy.pairing: expected independent or ot, got '" + name + "'");
}

std::string ToString(Pairing p) {
  return p == Pairing::kOt ? "ot" : "independent";
}

DenoiserConfig ToyConfig::DefaultToyDenoiser() {
  DenoiserConfig d;
  d.action_dim = 2;
  d.context_dim = 0;
  return d;
}

void to_json(nlohmann::json& j, const ToyConfig& c) {
  j = nlohmann::json{
      {"task", "toy"},
      {"seed", c.seed},
      {"toy", {{"generator", ToString(c.generator)},
               {"offset", c.offset},
               {"n_train", c.n_train},
               {"n_eval", c.n_eval},
               {"data_scale", c.data_scale},
               {"pairing", ToString(c.pairing)}}},
      {"schedule", c.schedule},
      {"denoiser", c.denoiser},
      {"trainer", c.trainer},
      {"optimizer", c.optimizer},
      {"sampler", c.sampler}};
}

ToyConfig ToyConfigFromJson(const nlohmann::json& root) {
  ToyConfig c;
  c.seed = GetOr(root, "seed", c.seed, "config");
  c.schedule = RequireSection(root, "schedule").get<ScheduleConfig>();
  if (root.contains("denoiser")) {
    c.denoiser = RequireSection(root, "denoiser").get<DenoiserConfig>();
  }
  if (root.contains("trainer")) c.trainer = RequireSection(root, "trainer").get<TrainerConfig>();
  if (root.contains("optimizer")) {
    c.optimizer = RequireSection(root, "optimizer").get<AdamConfig>();
  }
  if (root.contains("sampler")) c.sampler = RequireSection(root, "sampler").get<SamplerOptions>();
  if (root.contains("toy")) {
    const nlohmann::json& t = RequireSection(root, "toy");
    c.generator = ParseGenerator(GetOr<std::string>(t, "generator", ToString(c.generator), "toy"));
    c.offset = GetOr(t, "offset", c.offset, "toy");
    c.n_train = GetOr<Eigen::Index>(t, "n_train", c.n_train, "toy");
    c.n_eval = GetOr<Eigen::Index>(t, "n_eval", c.n_eval, "toy");
    c.data_scale = GetOr(t, "data_scale", c.data_scale, "toy");
    c.pairing = ParsePairing(GetOr<std::string>(t, "pairing", ToString(c.pairing), "toy"));
  }
  if (c.denoiser.action_dim != 2) throw ConfigError("denoiser.action_dim must be 2 for toy tasks");
  if (!(c.data_scale > 0.0)) throw ConfigError("toy.data_scale must be positive");
  if (c.n_eval > kMaxEmdPoints) throw ConfigError("toy.n_eval must be <= 1024");
  return c;
}

TrainedToyBridge TrainToyBridge(const ToyConfig& config) {
  const NoiseSchedule schedule(config.schedule);
  const BridgeDenoiser model(config.denoiser, schedule);
  const DatasetPair train =
      MakeDataset(config.generator, config.offset, config.n_train, DeriveSeed(config.seed, 1));
  const double inv = 1.0 / config.data_scale;

  BridgeDataset data;
  data.actions = inv * train.target.points;
  data.contexts = Matrix(0, data.actions.cols());
  PriorPolicy prior;
  if (config.pairing == Pairing::kOt) {
    data.sources = inv * train.source.points;
    data.actions = OtPairTargets(data.sources, data.actions);
    prior = PairedSourcePolicy();
  } else {
    prior = IndependentSourcePolicy(inv * train.source.points);
  }

  TrainerConfig trainer = config.trainer;
  trainer.seed = DeriveSeed(config.seed, 2, config.trainer.seed);
  TrainResult tr = TrainBridge(model, data, prior, trainer, config.optimizer,
                               model.net().Init(DeriveSeed(config.seed, 3)));

  TrainedToyBridge out = RestoreToyBridge(config, std::move(tr.params));
  out.metrics = std::move(tr.metrics);
  return out;
}

TrainedToyBridge RestoreToyBridge(const ToyConfig& config, Vector params) {
  const BridgeDenoiser model(config.denoiser, NoiseSchedule(config.schedule));
  if (params.size() != model.parameter_count()) {
    throw ShapeError("toy bridge: parameter count does not match the architecture");
  }
  TrainedToyBridge out;
  out.config = config;
  out.params = std::move(params);
  const DatasetPair eval =
      MakeDataset(config.generator, config.offset, config.n_eval, DeriveSeed(config.seed, 4));
  out.eval_source = eval.source;
  out.eval_target = eval.target;
  return out;
}

Matrix TranslateToy(const TrainedToyBridge& bridge, int k, SampleMode mode,
                    SampleResult* trace) {
  const ToyConfig& c = bridge.config;
  const NoiseSchedule schedule(c.schedule);
  const BridgeDenoiser model(c.denoiser, schedule);
  const NetworkDenoiser denoiser(model, bridge.params, Matrix(0, 1));
  SamplerOptions opts = c.sampler;
  opts.steps = k;
  opts.mode = mode;
  opts.keep_trace = trace != nullptr;
  opts.seed = DeriveSeed(c.seed, 5, c.sampler.seed);
  const Matrix aT = bridge.eval_source.points / c.data_scale;
  SampleResult r = Sample(denoiser, schedule, aT, opts);
  if (trace != nullptr) {
    for (Matrix& frame : r.trace) frame *= c.data_scale;
    r.final_state *= c.data_scale;
    *trace = r;
    return trace->final_state;
  }
  return r.final_state * c.data_scale;
}

TranslationMetrics EvaluateToy(const TrainedToyBridge& bridge, int k,
                               SampleMode mode) {
  TranslationMetrics m;
  m.generator = bridge.config.generator;
  m.offset = bridge.config.offset;
  m.k = k;
  m.seed = bridge.config.seed;
  m.emd_source_target = Emd(bridge.eval_source, bridge.eval_target);
  m.emd_result_target = EmdPoints(TranslateToy(bridge, k, mode), bridge.eval_target.points);
  return m;
}

TranslationMetrics RunTranslationExperiment(const ToyConfig& config) {
  return EvaluateToy(TrainToyBridge(config), config.sampler.steps, config.sampler.mode);
}

std::string TranslationCsv(const std::vector<TranslationMetrics>& rows,
                           const std::string& config_hash) {
  CsvWriter csv({"generator", "offset", "k", "seed", "emd_source_target",
                 "emd_result_target", "config_hash"});
  for (const TranslationMetrics& m : rows) {
    csv.Row({ToString(m.generator), FormatDouble(m.offset), std::to_string(m.k),
             std::to_string(m.seed), FormatDouble(m.emd_source_target),
             FormatDouble(m.emd_result_target), config_hash});
  }
  return csv.str();
}

Matrix SampleGaussianCloud(const Eigen::Vector2d& mu, const Eigen::Matrix2d& cov,
                           Eigen::Index n, std::uint64_t seed) {
  const Eigen::LLT<Eigen::Matrix2d> llt(cov);
  if (llt.info() != Eigen::Success) throw DomainError("covariance not positive definite");
  Rng rng(seed);
  Matrix p = llt.matrixL() * rng.NormalMatrix(2, n);
  p.colwise() += mu;
  return p;
}

ErrorBoundResult ErrorBoundExperiment(const ToyConfig& base,
                                      const std::vector<GaussianPair>& pairs) {
  ErrorBoundResult result;
  const NoiseSchedule schedule(base.schedule);
  const BridgeDenoiser model(base.denoiser, schedule);
  const double inv = 1.0 / base.data_scale;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const GaussianPair& g = pairs[i];
    // Common random numbers: every pair reuses the same streams so the pairs
    // differ only through their distributions.
    const std::uint64_t seed = DeriveSeed(base.seed, 100);
    BridgeDataset data;
    data.actions = inv * SampleGaussianCloud(g.mu_target, g.cov_target, base.n_train, DeriveSeed(seed, 1));
    data.contexts = Matrix(0, data.actions.cols());
    const Matrix source =
        inv * SampleGaussianCloud(g.mu_source, g.cov_source, base.n_train, DeriveSeed(seed, 2));
    TrainerConfig trainer = base.trainer;
    trainer.seed = DeriveSeed(seed, 3, base.trainer.seed);
    const TrainResult tr =
        TrainBridge(model, data, IndependentSourcePolicy(source), trainer,
                    base.optimizer, model.net().Init(DeriveSeed(seed, 4)));

    const Matrix eval_source =
        inv * SampleGaussianCloud(g.mu_source, g.cov_source, base.n_eval, DeriveSeed(seed, 5));
    const Matrix eval_target =
        SampleGaussianCloud(g.mu_target, g.cov_target, base.n_eval, DeriveSeed(seed, 6));
    SamplerOptions opts = base.sampler;
    opts.keep_trace = false;
    opts.seed = DeriveSeed(seed, 7, base.sampler.seed);
    const NetworkDenoiser denoiser(model, tr.params, Matrix(0, 1));
    const Matrix out = base.data_scale * Sample(denoiser, schedule, eval_source, opts).final_state;

    ErrorBoundPoint pt;
    pt.kl = KlGaussian(g.mu_source, g.cov_source, g.mu_target, g.cov_target);
    pt.mse = MatchedSquaredError(out, eval_target);
    result.points.push_back(pt);
  }
  std::vector<double> kl, mse;
  for (const ErrorBoundPoint& p : result.points) {
    kl.push_back(p.kl);
    mse.push_back(p.mse);
  }
  result.pearson = result.points.size() >= 2 ? Pearson(kl, mse) : 0.0;
  return result;
}

FewStepResult FewStepComparison(const ToyConfig& config, const DdpmConfig& ddpm,
                                const TrainerConfig& ddpm_trainer,
                                const AdamConfig& ddpm_optimizer,
                                const std::vector<int>& ks) {
  FewStepResult r;
  r.ks = ks;
  const TrainedToyBridge bridge = TrainToyBridge(config);
  r.emd_source_target = Emd(bridge.eval_source, bridge.eval_target);

  const DatasetPair train =
      MakeDataset(config.generator, config.offset, config.n_train, DeriveSeed(config.seed, 1));
  BridgeDataset data;
  data.actions = train.target.points / config.data_scale;
  const DdpmSchedule schedule(ddpm);
  const FilmMlp net(DdpmNetworkSpec(2, config.denoiser.hidden, 0, config.denoiser.time_embed_dim));
  TrainerConfig trainer = ddpm_trainer;
  trainer.seed = DeriveSeed(config.seed, 6, ddpm_trainer.seed);
  const TrainResult tr = TrainDdpm(net, schedule, data, trainer, ddpm_optimizer,
                                   net.Init(DeriveSeed(config.seed, 7)));
  for (int k : ks) {
    r.bridge_emd.push_back(
        EmdPoints(TranslateToy(bridge, k, config.sampler.mode), bridge.eval_target.points));
    const Matrix x = config.data_scale * DdpmSample(net, tr.params, schedule, k,
                                                    DeriveSeed(config.seed, 8, k),
                                                    Matrix(), config.n_eval);
    r.ddpm_emd.push_back(EmdPoints(x, bridge.eval_target.points));
  }
  return r;
}

}  // namespace ddbm
