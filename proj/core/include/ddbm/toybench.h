// Copyright 2026 The ddbm Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef DDBM_TOYBENCH_H_
#define DDBM_TOYBENCH_H_

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include "ddbm/ddpm.h"
#include "ddbm/denoiser.h"
#include "ddbm/sampler.h"
#include "ddbm/schedule.h"
#include "ddbm/trainer.h"

namespace ddbm {

enum class Generator { kEightGaussians, kTwoMoons, kShiftedClusters };

Generator ParseGenerator(const std::string& name);
std::string ToString(Generator g);

struct PointCloud2D {
  Matrix points;  // 2 x n
  std::string name;
  double offset = 0.0;
  std::uint64_t seed = 0;
  Eigen::Index size() const { return points.cols(); }
};

struct DatasetPair {
  PointCloud2D source;
  PointCloud2D target;
};

// EightGaussians: target = 8 modes (radius 4, sigma 0.3, modes assigned
//   round-robin), source = N((offset, 0), 4 I).
// TwoMoons: target = two interleaved arcs with noise 0.1, source =
//   N((offset, 0), I).
// ShiftedClusters: target = EightGaussians, source = EightGaussians + (offset, 0).
DatasetPair MakeDataset(Generator generator, double offset, Eigen::Index n,
                        std::uint64_t seed);

// Minimum-cost perfect matching on a square cost matrix (shortest augmenting
// paths with potentials, O(n^3)). Returns col[row].
std::vector<int> SolveAssignment(const Matrix& cost);

// Mean Euclidean distance under the optimal matching; n <= 1024.
double EmdPoints(const Matrix& a, const Matrix& b);
double Emd(const PointCloud2D& a, const PointCloud2D& b);

// Mean squared distance under the squared-cost optimal matching.
double MatchedSquaredError(const Matrix& a, const Matrix& b);

// Reorders target columns so column j is matched to source column j under
// the squared Euclidean cost.
Matrix OtPairTargets(const Matrix& source, const Matrix& target);

// KL(N(mu1, s1) || N(mu2, s2)); throws DomainError for non-SPD covariances.
double KlGaussian(const Vector& mu1, const Matrix& s1, const Vector& mu2,
                  const Matrix& s2);

double Pearson(const std::vector<double>& x, const std::vector<double>& y);
// Pearson correlation of average ranks.
double Spearman(const std::vector<double>& x, const std::vector<double>& y);

enum class Pairing { kIndependent, kOt };

Pairing ParsePairing(const std::string& name);
std::string ToString(Pairing p);

struct ToyConfig {
  Generator generator = Generator::kShiftedClusters;
  double offset = 1.0;
  Eigen::Index n_train = 1024;
  Eigen::Index n_eval = 1024;
  // Points are divided by this before training and sampling.
  double data_scale = 2.0;
  Pairing pairing = Pairing::kOt;
  std::uint64_t seed = 0;
  ScheduleConfig schedule;
  DenoiserConfig denoiser = DefaultToyDenoiser();
  TrainerConfig trainer;
  AdamConfig optimizer;
  SamplerOptions sampler;

  static DenoiserConfig DefaultToyDenoiser();
};

void to_json(nlohmann::json& j, const ToyConfig& c);
// Reads the toy-task fields plus the shared sections of a run config.
ToyConfig ToyConfigFromJson(const nlohmann::json& root);

struct TranslationMetrics {
  Generator generator = Generator::kShiftedClusters;
  double offset = 0.0;
  int k = 10;
  std::uint64_t seed = 0;
  double emd_source_target = 0.0;
  double emd_result_target = 0.0;
};

struct TrainedToyBridge {
  ToyConfig config;
  Vector params;
  std::vector<MetricsRow> metrics;
  PointCloud2D eval_source;
  PointCloud2D eval_target;
};

TrainedToyBridge TrainToyBridge(const ToyConfig& config);

// Rebuilds a trained bridge (and its held-out clouds) from saved parameters.
TrainedToyBridge RestoreToyBridge(const ToyConfig& config, Vector params);

// Samples the trained bridge from the held-out source cloud with k steps.
// Returns the result in original units; `trace` receives the k + 1 frames
// (scaled back) when non-null.
Matrix TranslateToy(const TrainedToyBridge& bridge, int k, SampleMode mode,
                    SampleResult* trace = nullptr);

TranslationMetrics EvaluateToy(const TrainedToyBridge& bridge, int k,
                               SampleMode mode);

TranslationMetrics RunTranslationExperiment(const ToyConfig& config);

std::string TranslationCsv(const std::vector<TranslationMetrics>& rows,
                           const std::string& config_hash);

struct GaussianPair {
  Eigen::Vector2d mu_source = Eigen::Vector2d::Zero();
  Eigen::Matrix2d cov_source = Eigen::Matrix2d::Identity();
  Eigen::Vector2d mu_target = Eigen::Vector2d::Zero();
  Eigen::Matrix2d cov_target = Eigen::Matrix2d::Identity();
};

struct ErrorBoundPoint {
  double kl = 0.0;
  double mse = 0.0;
};

struct ErrorBoundResult {
  std::vector<ErrorBoundPoint> points;
  double pearson = 0.0;
};

// For each pair: train an unpaired bridge target <- source, sample with
// base.sampler, MSE = MatchedSquaredError(result, fresh target sample).
ErrorBoundResult ErrorBoundExperiment(const ToyConfig& base,
                                      const std::vector<GaussianPair>& pairs);

// Result points in original units drawn from a Gaussian pair.
Matrix SampleGaussianCloud(const Eigen::Vector2d& mu, const Eigen::Matrix2d& cov,
                           Eigen::Index n, std::uint64_t seed);

struct FewStepResult {
  std::vector<int> ks;
  std::vector<double> bridge_emd;
  std::vector<double> ddpm_emd;
  double emd_source_target = 0.0;
};

// Trains the bridge of `config` and a DDPM baseline on the same target set
// and reports EMD to the held-out target for each k.
FewStepResult FewStepComparison(const ToyConfig& config,
                                const DdpmConfig& ddpm,
                                const TrainerConfig& ddpm_trainer,
                                const AdamConfig& ddpm_optimizer,
                                const std::vector<int>& ks);

}  // namespace ddbm

#endif  // DDBM_TOYBENCH_H_
