// Copyright 2026 The ddbm Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef DDBM_PRIORS_H_
#define DDBM_PRIORS_H_

#include <array>
#include <cstdint>
#include <limits>
#include <string>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include "ddbm/film_mlp.h"
#include "ddbm/types.h"

namespace ddbm {

// Robot frame: y forward, x lateral with positive x on the robot's left.
// Headings are measured from +y, positive toward +x.
enum class Decision { kStraight = 0, kLeftTurn, kRightTurn, kUTurnLeft, kUTurnRight };
inline constexpr int kNumDecisions = 5;

std::string ToString(Decision d);

// Half-open heading band in radians; kStraight is open on both ends.
struct HeadingBand {
  double lo = 0.0;
  double hi = 0.0;
  bool lo_closed = true;
  bool hi_closed = false;
  bool Contains(double theta) const;
};

HeadingBand BandFor(Decision d);
double BandMidpoint(Decision d);
// theta in (-pi, pi]; values outside are wrapped.
Decision ClassifyHeading(double theta);
// Heading of a planar endpoint, atan2(x, y).
double HeadingOf(const Eigen::Vector2d& p);

// n i.i.d. standard normal pairs.
ActionSequence GaussianPrior(int n_waypoints, std::uint64_t seed);

struct Parabola {
  double h = 0.0;
  double a = 0.0;
  double k = 0.0;
  Eigen::Vector2d p1 = Eigen::Vector2d::Zero();
  Eigen::Vector2d p2 = Eigen::Vector2d::Zero();
  // y(x) = y1 + a (x - x1)(x + x1 - 2h), algebraically a (x - h)^2 + k but
  // exact at both endpoints.
  double operator()(double x) const;
};

Parabola FitParabola(const Eigen::Vector2d& p1, const Eigen::Vector2d& p2,
                     double h);

// Open interval (lo, hi), possibly half-infinite.
struct Interval {
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();
  bool Contains(double x) const { return x > lo && x < hi; }
};

// Vertex abscissae h for which the parabola through p1, p2 opens downward.
Interval AdmissibleAxisInterval(const Eigen::Vector2d& p1,
                                const Eigen::Vector2d& p2);

double NoiseStd(double confidence, double min_std, double max_std);

struct RuleHeadOutput {
  std::array<double, kNumDecisions> probs{};
  double length = 1.0;
  double confidence = 0.2;
  Decision decision = Decision::kStraight;
};

struct ParabolicPriorConfig {
  double min_std = 0.05;
  double max_std = 0.5;
  double h_window = 5.0;  // h is clipped to [-h_window d, h_window d]
};

void to_json(nlohmann::json& j, const ParabolicPriorConfig& c);
void from_json(const nlohmann::json& j, ParabolicPriorConfig& c);

struct ParabolicSample {
  ActionSequence action;
  Eigen::Vector2d endpoint = Eigen::Vector2d::Zero();
  Parabola parabola;
  bool fallback = false;  // straight segment used instead of a parabola
};

ParabolicSample SampleParabolicPriorDetailed(const RuleHeadOutput& rule,
                                             std::uint64_t seed,
                                             int n_waypoints,
                                             const ParabolicPriorConfig& config);

ActionSequence SampleParabolicPrior(const RuleHeadOutput& rule,
                                    std::uint64_t seed, int n_waypoints,
                                    const ParabolicPriorConfig& config = {});

// Number of straight-line fallbacks taken so far in this process.
long ParabolicFallbackCount();

// Linear head: context -> [5 logits, raw length, coarse action].
class RuleHead {
 public:
  struct Batch {
    Matrix logits;   // 5 x B
    Matrix probs;    // 5 x B
    Vector raw_length;
    Vector length;   // softplus(raw_length)
    Matrix coarse;   // action_dim x B
    FilmMlp::Tape tape;
  };

  RuleHead(int context_dim, int action_dim);

  const FilmMlp& net() const { return net_; }
  Eigen::Index parameter_count() const { return net_.parameter_count(); }
  int action_dim() const { return action_dim_; }

  Vector Init(std::uint64_t seed) const { return net_.Init(seed); }
  Batch Forward(const Vector& params, const Matrix& context) const;
  RuleHeadOutput Output(const Batch& batch, Eigen::Index column) const;

  struct LossResult {
    double loss = 0.0;
    double cross_entropy = 0.0;
    double action_mse = 0.0;
    Vector grad_params;
    Matrix grad_context;
  };

  // Mean over the batch of
  //   lambda_c CE + lambda_a (MSE(coarse, action) + (length - true_length)^2).
  LossResult Loss(const Vector& params, const Batch& batch,
                  const Eigen::VectorXi& true_class, const Matrix& true_action,
                  const Vector& true_length, double lambda_c,
                  double lambda_a) const;

 private:
  int action_dim_;
  FilmMlp net_;
};

RuleHeadOutput RuleHeadForward(const RuleHead& head, const Vector& params,
                               const ContextVector& context);

// lambda_c * CE(probs, true_class) + lambda_a * MSE(predicted, true_action).
double RuleLoss(const RuleHeadOutput& head_out, Decision true_class,
                const ActionSequence& true_action,
                const ActionSequence& predicted_action, double lambda_c,
                double lambda_a);

// KL(N(mu1, diag exp(logvar1)) || N(mu2, diag exp(logvar2))).
double DiagonalGaussianKl(const Vector& mu1, const Vector& logvar1,
                          const Vector& mu2, const Vector& logvar2);

struct CvaeConfig {
  int latent_dim = 8;
  std::vector<int> hidden = {64, 64};
};

void to_json(nlohmann::json& j, const CvaeConfig& c);
void from_json(const nlohmann::json& j, CvaeConfig& c);

class Cvae {
 public:
  Cvae(int context_dim, int action_dim, const CvaeConfig& config = {});

  Eigen::Index parameter_count() const;
  int latent_dim() const { return config_.latent_dim; }
  int action_dim() const { return action_dim_; }
  Vector Init(std::uint64_t seed) const;

  // z ~ p(z | c), decoded. context: context_dim x B.
  Matrix Sample(const Vector& params, const Matrix& context,
                std::uint64_t seed) const;
  Matrix Decode(const Vector& params, const Matrix& context,
                const Matrix& z) const;
  // Decoder applied to the conditional-prior mean.
  Matrix MeanAction(const Vector& params, const Matrix& context) const;

  struct LossResult {
    double loss = 0.0;
    double reconstruction = 0.0;
    double kl = 0.0;
    Vector grad_params;
    Matrix grad_context;
  };

  // Batch mean of ||decode(c, z) - a||^2 + KL(q(z|c,a) || p(z|c)) with one
  // reparametrised draw z ~ q per sample.
  LossResult Loss(const Vector& params, const Matrix& context,
                  const Matrix& action, std::uint64_t seed) const;

 private:
  Eigen::Index EncoderOffset() const { return 0; }
  Eigen::Index PriorOffset() const { return encoder_.parameter_count(); }
  Eigen::Index DecoderOffset() const {
    return encoder_.parameter_count() + prior_.parameter_count();
  }
  Vector Segment(const Vector& params, Eigen::Index offset,
                 const FilmMlp& net) const;

  int context_dim_;
  int action_dim_;
  CvaeConfig config_;
  FilmMlp encoder_;
  FilmMlp prior_;
  FilmMlp decoder_;
};

ActionSequence CvaeForward(const Cvae& cvae, const Vector& params,
                           const ContextVector& context, std::uint64_t seed);

// Linear regression of the remaining step count from the context.
class TemporalHead {
 public:
  explicit TemporalHead(int context_dim, double output_scale = 10.0);

  Eigen::Index parameter_count() const { return net_.parameter_count(); }
  Vector Init(std::uint64_t seed) const { return net_.Init(seed); }
  Vector Predict(const Vector& params, const Matrix& context) const;

  struct LossResult {
    double loss = 0.0;
    Vector grad_params;
    Matrix grad_context;
  };
  LossResult Loss(const Vector& params, const Matrix& context,
                  const Vector& true_steps) const;

 private:
  double output_scale_;
  FilmMlp net_;
};

// Mean squared error between predictions and non-negative step counts.
double TemporalDistanceLoss(const Vector& predicted, const Vector& true_steps);

}  // namespace ddbm

#endif  // DDBM_PRIORS_H_
