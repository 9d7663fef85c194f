// Copyright 2026 The ddbm Authors
// SPDX-License-Identifier: Apache-2.0

#include "ddbm/priors.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>

#include <nlohmann/json.hpp>

#include "ddbm/config.h"
#include "ddbm/log.h"
#include "ddbm/random.h"

namespace ddbm {
namespace {

constexpr double kDeg = std::numbers::pi / 180.0;
constexpr double kStraightHalf = 15.0 * kDeg;
constexpr double kTurnLimit = 100.0 * kDeg;

std::atomic<long> g_fallbacks{0};

double Softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }
double Sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

NetworkSpec LinearSpec(int in, int out) {
  NetworkSpec s;
  s.input_dim = in;
  s.hidden = {};
  s.output_dim = out;
  return s;
}

NetworkSpec MlpSpec(int in, const std::vector<int>& hidden, int out) {
  NetworkSpec s;
  s.input_dim = in;
  s.hidden = hidden;
  s.output_dim = out;
  return s;
}

}  // namespace

std::string ToString(Decision d) {
  switch (d) {
    case Decision::kStraight: return "straight";
    case Decision::kLeftTurn: return "left_turn";
    case Decision::kRightTurn: return "right_turn";
    case Decision::kUTurnLeft: return "u_turn_left";
    case Decision::kUTurnRight: return "u_turn_right";
  }
  return "unknown";
}

bool HeadingBand::Contains(double theta) const {
  const bool above = lo_closed ? theta >= lo : theta > lo;
  const bool below = hi_closed ? theta <= hi : theta < hi;
  return above && below;
}

HeadingBand BandFor(Decision d) {
  const double pi = std::numbers::pi;
  switch (d) {
    case Decision::kStraight: return {-kStraightHalf, kStraightHalf, false, false};
    case Decision::kLeftTurn: return {kStraightHalf, kTurnLimit, true, false};
    case Decision::kRightTurn: return {-kTurnLimit, -kStraightHalf, false, true};
    case Decision::kUTurnLeft: return {kTurnLimit, pi, true, true};
    case Decision::kUTurnRight: return {-pi, -kTurnLimit, false, true};
  }
  throw DomainError("unknown decision");
}

double BandMidpoint(Decision d) {
  const HeadingBand b = BandFor(d);
  return 0.5 * (b.lo + b.hi);
}

Decision ClassifyHeading(double theta) {
  const double pi = std::numbers::pi;
  if (!std::isfinite(theta)) throw DomainError("heading must be finite");
  theta = std::remainder(theta, 2.0 * pi);
  if (theta <= -pi) theta += 2.0 * pi;
  for (int i = 0; i < kNumDecisions; ++i) {
    const Decision d = static_cast<Decision>(i);
    if (BandFor(d).Contains(theta)) return d;
  }
  // Unreachable for theta in (-pi, pi].
  return Decision::kUTurnLeft;
}

double HeadingOf(const Eigen::Vector2d& p) { return std::atan2(p.x(), p.y()); }

ActionSequence GaussianPrior(int n_waypoints, std::uint64_t seed) {
  if (n_waypoints < 1) throw DomainError("gaussian_prior: n_waypoints >= 1");
  Rng rng(seed);
  return rng.NormalVector(2 * n_waypoints);
}

double Parabola::operator()(double x) const {
  return p1.y() + a * (x - p1.x()) * (x + p1.x() - 2.0 * h);
}

Parabola FitParabola(const Eigen::Vector2d& p1, const Eigen::Vector2d& p2,
                     double h) {
  const double dx = p2.x() - p1.x();
  const double span = p2.x() + p1.x() - 2.0 * h;
  if (dx == 0.0 || span == 0.0 || !std::isfinite(h)) {
    throw DegenerateGeometryError(
        "parabola_fit: equal abscissae or axis on the chord midline");
  }
  Parabola p;
  p.p1 = p1;
  p.p2 = p2;
  p.h = h;
  p.a = (p2.y() - p1.y()) / (dx * span);
  p.k = p1.y() - p.a * (p1.x() - h) * (p1.x() - h);
  return p;
}

Interval AdmissibleAxisInterval(const Eigen::Vector2d& p1,
                                const Eigen::Vector2d& p2) {
  const double dx = p2.x() - p1.x();
  const double dy = p2.y() - p1.y();
  if (dx == 0.0) throw DegenerateGeometryError("admissible_h: equal abscissae");
  if (dy == 0.0) {
    throw DegenerateGeometryError(
        "admissible_h: equal heights admit no downward parabola with a != 0");
  }
  const double mid = 0.5 * (p1.x() + p2.x());
  Interval in;
  // a < 0 needs sign(mid - h) = -sign(dx * dy).
  if ((dx > 0.0) == (dy > 0.0)) {
    in.lo = mid;
  } else {
    in.hi = mid;
  }
  return in;
}

double NoiseStd(double confidence, double min_std, double max_std) {
  if (!(confidence >= 0.0 && confidence <= 1.0)) {
    throw DomainError("noise_std: confidence must lie in [0, 1]");
  }
  if (!(min_std > 0.0) || !(max_std >= min_std)) {
    throw DomainError("noise_std: need 0 < min_std <= max_std");
  }
  return min_std + (max_std - min_std) * (1.0 - confidence);
}

void to_json(nlohmann::json& j, const ParabolicPriorConfig& c) {
  j = nlohmann::json{{"min_std", c.min_std}, {"max_std", c.max_std},
                     {"h_window", c.h_window}};
}

void from_json(const nlohmann::json& j, ParabolicPriorConfig& c) {
  c.min_std = GetOr(j, "min_std", c.min_std, "prior");
  c.max_std = GetOr(j, "max_std", c.max_std, "prior");
  c.h_window = GetOr(j, "h_window", c.h_window, "prior");
  if (!(c.min_std > 0.0) || !(c.max_std >= c.min_std)) {
    throw ConfigError("prior: need 0 < min_std <= max_std");
  }
  if (!(c.h_window > 0.0)) throw ConfigError("prior.h_window must be positive");
}

ParabolicSample SampleParabolicPriorDetailed(const RuleHeadOutput& rule,
                                             std::uint64_t seed,
                                             int n_waypoints,
                                             const ParabolicPriorConfig& config) {
  if (n_waypoints < 2) throw DomainError("parabolic prior needs >= 2 waypoints");
  if (!(rule.length > 0.0)) throw DomainError("rule length must be positive");
  Rng rng(seed);
  const double sigma = NoiseStd(rule.confidence, config.min_std, config.max_std);
  const double theta = BandMidpoint(rule.decision) + sigma * rng.Normal();
  const double dist = std::max(rule.length + sigma * rng.Normal(), 0.05 * rule.length);
  const double u = rng.Uniform();

  ParabolicSample out;
  out.endpoint = Eigen::Vector2d(dist * std::sin(theta), dist * std::cos(theta));
  out.action.resize(2 * n_waypoints);
  const Eigen::Vector2d p1 = Eigen::Vector2d::Zero();
  const Eigen::Vector2d& p2 = out.endpoint;

  bool ok = std::abs(p2.x()) > 1e-9 * dist && std::abs(p2.y()) > 1e-12 * dist;
  if (ok) {
    const Interval admissible = AdmissibleAxisInterval(p1, p2);
    const double lo = std::max(admissible.lo, -config.h_window * dist);
    const double hi = std::min(admissible.hi, config.h_window * dist);
    if (hi > lo) {
      const double quarter = 0.25 * (hi - lo);
      const double h = lo + quarter + u * 2.0 * quarter;
      out.parabola = FitParabola(p1, p2, h);
      for (int i = 0; i < n_waypoints; ++i) {
        const double x = i == n_waypoints - 1
                             ? p2.x()
                             : p2.x() * static_cast<double>(i) / (n_waypoints - 1);
        out.action[2 * i] = x;
        out.action[2 * i + 1] = out.parabola(x);
      }
    } else {
      ok = false;
    }
  }
  if (!ok) {
    out.fallback = true;
    if (g_fallbacks.fetch_add(1) == 0) {
      LogWarning("parabolic prior: degenerate geometry, using a straight segment");
    }
    for (int i = 0; i < n_waypoints; ++i) {
      const double s = static_cast<double>(i) / (n_waypoints - 1);
      out.action.segment<2>(2 * i) = s * p2;
    }
  }
  return out;
}

ActionSequence SampleParabolicPrior(const RuleHeadOutput& rule,
                                    std::uint64_t seed, int n_waypoints,
                                    const ParabolicPriorConfig& config) {
  return SampleParabolicPriorDetailed(rule, seed, n_waypoints, config).action;
}

long ParabolicFallbackCount() { return g_fallbacks.load(); }

RuleHead::RuleHead(int context_dim, int action_dim)
    : action_dim_(action_dim),
      net_(LinearSpec(context_dim, kNumDecisions + 1 + action_dim)) {}

RuleHead::Batch RuleHead::Forward(const Vector& params,
                                  const Matrix& context) const {
  Batch b;
  const Matrix out = net_.Forward(params, context, Vector(), Matrix(), &b.tape);
  const Eigen::Index n = context.cols();
  b.logits = out.topRows(kNumDecisions);
  b.probs.resize(kNumDecisions, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const double m = b.logits.col(j).maxCoeff();
    const Eigen::ArrayXd e = (b.logits.col(j).array() - m).exp();
    b.probs.col(j) = (e / e.sum()).matrix();
  }
  b.raw_length = out.row(kNumDecisions).transpose();
  b.length = b.raw_length.unaryExpr([](double x) { return Softplus(x); });
  b.coarse = out.bottomRows(action_dim_);
  return b;
}

RuleHeadOutput RuleHead::Output(const Batch& batch, Eigen::Index column) const {
  RuleHeadOutput o;
  Eigen::Index best = 0;
  for (int i = 0; i < kNumDecisions; ++i) {
    o.probs[static_cast<std::size_t>(i)] = batch.probs(i, column);
    if (batch.probs(i, column) > batch.probs(best, column)) best = i;
  }
  o.decision = static_cast<Decision>(best);
  o.confidence = batch.probs(best, column);
  o.length = batch.length[column];
  return o;
}

RuleHead::LossResult RuleHead::Loss(const Vector& params, const Batch& batch,
                                    const Eigen::VectorXi& true_class,
                                    const Matrix& true_action,
                                    const Vector& true_length, double lambda_c,
                                    double lambda_a) const {
  const Eigen::Index n = batch.probs.cols();
  const double inv_n = 1.0 / static_cast<double>(n);
  Matrix upstream = Matrix::Zero(kNumDecisions + 1 + action_dim_, n);
  LossResult r;
  for (Eigen::Index j = 0; j < n; ++j) {
    const int c = true_class[j];
    r.cross_entropy -= std::log(std::max(batch.probs(c, j), 1e-300));
    upstream.block(0, j, kNumDecisions, 1) = lambda_c * inv_n * batch.probs.col(j);
    upstream(c, j) -= lambda_c * inv_n;
    const double dl = batch.length[j] - true_length[j];
    r.action_mse += dl * dl;
    upstream(kNumDecisions, j) =
        lambda_a * inv_n * 2.0 * dl * Sigmoid(batch.raw_length[j]);
  }
  const Matrix diff = batch.coarse - true_action;
  r.action_mse += diff.squaredNorm() / action_dim_;
  upstream.bottomRows(action_dim_) = (lambda_a * inv_n * 2.0 / action_dim_) * diff;
  r.cross_entropy *= inv_n;
  r.action_mse *= inv_n;
  r.loss = lambda_c * r.cross_entropy + lambda_a * r.action_mse;
  FilmMlp::Gradients g = net_.Backward(params, batch.tape, upstream);
  r.grad_params = std::move(g.params);
  r.grad_context = std::move(g.input);
  return r;
}

RuleHeadOutput RuleHeadForward(const RuleHead& head, const Vector& params,
                               const ContextVector& context) {
  return head.Output(head.Forward(params, context), 0);
}

double RuleLoss(const RuleHeadOutput& head_out, Decision true_class,
                const ActionSequence& true_action,
                const ActionSequence& predicted_action, double lambda_c,
                double lambda_a) {
  CheckSameSize(true_action, predicted_action, "rule_loss");
  const double p = head_out.probs[static_cast<std::size_t>(true_class)];
  const double ce = -std::log(std::max(p, 1e-300));
  const double mse = true_action.size() == 0
                         ? 0.0
                         : (predicted_action - true_action).squaredNorm() /
                               static_cast<double>(true_action.size());
  return lambda_c * ce + lambda_a * mse;
}

double DiagonalGaussianKl(const Vector& mu1, const Vector& logvar1,
                          const Vector& mu2, const Vector& logvar2) {
  CheckSameSize(mu1, mu2, "kl");
  CheckSameSize(logvar1, logvar2, "kl");
  const Eigen::ArrayXd v1 = logvar1.array().exp();
  const Eigen::ArrayXd v2 = logvar2.array().exp();
  return 0.5 * (logvar2.array() - logvar1.array() +
                (v1 + (mu1 - mu2).array().square()) / v2 - 1.0)
                   .sum();
}

void to_json(nlohmann::json& j, const CvaeConfig& c) {
  j = nlohmann::json{{"latent_dim", c.latent_dim}, {"hidden", c.hidden}};
}

void from_json(const nlohmann::json& j, CvaeConfig& c) {
  c.latent_dim = GetOr(j, "latent_dim", c.latent_dim, "prior.cvae");
  c.hidden = GetOr(j, "hidden", c.hidden, "prior.cvae");
  if (c.latent_dim <= 0) throw ConfigError("prior.cvae.latent_dim must be positive");
}

Cvae::Cvae(int context_dim, int action_dim, const CvaeConfig& config)
    : context_dim_(context_dim),
      action_dim_(action_dim),
      config_(config),
      encoder_(MlpSpec(context_dim + action_dim, config.hidden, 2 * config.latent_dim)),
      prior_(MlpSpec(context_dim, config.hidden, 2 * config.latent_dim)),
      decoder_(MlpSpec(context_dim + config.latent_dim, config.hidden, action_dim)) {}

Eigen::Index Cvae::parameter_count() const {
  return encoder_.parameter_count() + prior_.parameter_count() +
         decoder_.parameter_count();
}

Vector Cvae::Init(std::uint64_t seed) const {
  Vector p(parameter_count());
  p.segment(EncoderOffset(), encoder_.parameter_count()) =
      encoder_.Init(DeriveSeed(seed, 1));
  p.segment(PriorOffset(), prior_.parameter_count()) = prior_.Init(DeriveSeed(seed, 2));
  p.segment(DecoderOffset(), decoder_.parameter_count()) =
      decoder_.Init(DeriveSeed(seed, 3));
  return p;
}

Vector Cvae::Segment(const Vector& params, Eigen::Index offset,
                     const FilmMlp& net) const {
  if (params.size() != parameter_count()) throw ShapeError("cvae: parameter count");
  return params.segment(offset, net.parameter_count());
}

Matrix Cvae::Decode(const Vector& params, const Matrix& context,
                    const Matrix& z) const {
  Matrix in(context_dim_ + config_.latent_dim, context.cols());
  in.topRows(context_dim_) = context;
  in.bottomRows(config_.latent_dim) = z;
  return decoder_.Forward(Segment(params, DecoderOffset(), decoder_), in,
                          Vector(), Matrix());
}

Matrix Cvae::MeanAction(const Vector& params, const Matrix& context) const {
  const Matrix p = prior_.Forward(Segment(params, PriorOffset(), prior_), context,
                                  Vector(), Matrix());
  return Decode(params, context, p.topRows(config_.latent_dim));
}

Matrix Cvae::Sample(const Vector& params, const Matrix& context,
                    std::uint64_t seed) const {
  const int L = config_.latent_dim;
  const Matrix p = prior_.Forward(Segment(params, PriorOffset(), prior_), context,
                                  Vector(), Matrix());
  Rng rng(seed);
  const Matrix eps = rng.NormalMatrix(L, context.cols());
  const Matrix z =
      p.topRows(L) + ((0.5 * p.bottomRows(L).array()).exp() * eps.array()).matrix();
  return Decode(params, context, z);
}

Cvae::LossResult Cvae::Loss(const Vector& params, const Matrix& context,
                            const Matrix& action, std::uint64_t seed) const {
  const int L = config_.latent_dim;
  const Eigen::Index n = context.cols();
  const double inv_n = 1.0 / static_cast<double>(n);
  const Vector pe = Segment(params, EncoderOffset(), encoder_);
  const Vector pp = Segment(params, PriorOffset(), prior_);
  const Vector pd = Segment(params, DecoderOffset(), decoder_);

  Matrix enc_in(context_dim_ + action_dim_, n);
  enc_in.topRows(context_dim_) = context;
  enc_in.bottomRows(action_dim_) = action;
  FilmMlp::Tape te, tp, td;
  const Matrix q = encoder_.Forward(pe, enc_in, Vector(), Matrix(), &te);
  const Matrix p = prior_.Forward(pp, context, Vector(), Matrix(), &tp);
  const Eigen::ArrayXXd mu_q = q.topRows(L).array();
  const Eigen::ArrayXXd lv_q = q.bottomRows(L).array();
  const Eigen::ArrayXXd mu_p = p.topRows(L).array();
  const Eigen::ArrayXXd lv_p = p.bottomRows(L).array();
  const Eigen::ArrayXXd std_q = (0.5 * lv_q).exp();
  const Eigen::ArrayXXd var_q = lv_q.exp();
  const Eigen::ArrayXXd var_p = lv_p.exp();

  Rng rng(seed);
  const Eigen::ArrayXXd eps = rng.NormalMatrix(L, n).array();
  Matrix dec_in(context_dim_ + L, n);
  dec_in.topRows(context_dim_) = context;
  dec_in.bottomRows(L) = (mu_q + std_q * eps).matrix();
  const Matrix recon = decoder_.Forward(pd, dec_in, Vector(), Matrix(), &td);

  LossResult r;
  const Matrix diff = recon - action;
  r.reconstruction = diff.squaredNorm() * inv_n;
  const Eigen::ArrayXXd dmu = mu_q - mu_p;
  r.kl = 0.5 * (lv_p - lv_q + (var_q + dmu.square()) / var_p - 1.0).sum() * inv_n;
  r.loss = r.reconstruction + r.kl;
  if (!std::isfinite(r.loss)) throw DivergenceError("cvae loss is not finite");

  const FilmMlp::Gradients gd = decoder_.Backward(pd, td, (2.0 * inv_n) * diff);
  const Eigen::ArrayXXd dz = gd.input.bottomRows(L).array();
  Matrix dq(2 * L, n), dp(2 * L, n);
  dq.topRows(L) = (dz + inv_n * dmu / var_p).matrix();
  dq.bottomRows(L) =
      (dz * eps * 0.5 * std_q + inv_n * 0.5 * (var_q / var_p - 1.0)).matrix();
  dp.topRows(L) = (-inv_n * dmu / var_p).matrix();
  dp.bottomRows(L) = (inv_n * 0.5 * (1.0 - (var_q + dmu.square()) / var_p)).matrix();
  const FilmMlp::Gradients ge = encoder_.Backward(pe, te, dq);
  const FilmMlp::Gradients gp = prior_.Backward(pp, tp, dp);

  r.grad_params.resize(parameter_count());
  r.grad_params.segment(EncoderOffset(), pe.size()) = ge.params;
  r.grad_params.segment(PriorOffset(), pp.size()) = gp.params;
  r.grad_params.segment(DecoderOffset(), pd.size()) = gd.params;
  r.grad_context = gd.input.topRows(context_dim_) + ge.input.topRows(context_dim_) +
                   gp.input;
  return r;
}

ActionSequence CvaeForward(const Cvae& cvae, const Vector& params,
                           const ContextVector& context, std::uint64_t seed) {
  return cvae.Sample(params, context, seed).col(0);
}

TemporalHead::TemporalHead(int context_dim, double output_scale)
    : output_scale_(output_scale), net_(LinearSpec(context_dim, 1)) {}

Vector TemporalHead::Predict(const Vector& params, const Matrix& context) const {
  return output_scale_ *
         net_.Forward(params, context, Vector(), Matrix()).row(0).transpose();
}

TemporalHead::LossResult TemporalHead::Loss(const Vector& params,
                                            const Matrix& context,
                                            const Vector& true_steps) const {
  FilmMlp::Tape tape;
  const Vector pred = output_scale_ * net_.Forward(params, context, Vector(),
                                                   Matrix(), &tape)
                                          .row(0)
                                          .transpose();
  LossResult r;
  r.loss = TemporalDistanceLoss(pred, true_steps);
  const double inv_n = 1.0 / static_cast<double>(pred.size());
  const Matrix upstream =
      (2.0 * inv_n * output_scale_ * (pred - true_steps)).transpose();
  FilmMlp::Gradients g = net_.Backward(params, tape, upstream);
  r.grad_params = std::move(g.params);
  r.grad_context = std::move(g.input);
  return r;
}

double TemporalDistanceLoss(const Vector& predicted, const Vector& true_steps) {
  CheckSameSize(predicted, true_steps, "temporal_distance_loss");
  if ((true_steps.array() < 0.0).any()) {
    throw DomainError("temporal_distance_loss: step counts must be >= 0");
  }
  if (predicted.size() == 0) return 0.0;
  return (predicted - true_steps).squaredNorm() /
         static_cast<double>(predicted.size());
}

}  // namespace ddbm
