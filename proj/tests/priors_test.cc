// Copyright 2026 The ddbm Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <numbers>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "ddbm/priors.h"
#include "ddbm/random.h"

namespace ddbm {
namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

TEST(GaussianPrior, MomentsAndDeterminism) {
  const int n = 100000;
  Eigen::Vector2d sum = Eigen::Vector2d::Zero(), sum2 = Eigen::Vector2d::Zero();
  for (int i = 0; i < n; ++i) {
    const ActionSequence a = GaussianPrior(1, DeriveSeed(3, i));
    sum += a;
    sum2 += a.cwiseProduct(a);
  }
  const Eigen::Vector2d mean = sum / n;
  const Eigen::Vector2d var = sum2 / n - mean.cwiseProduct(mean);
  for (int d = 0; d < 2; ++d) {
    EXPECT_NEAR(mean[d], 0.0, 0.02);
    EXPECT_NEAR(var[d], 1.0, 0.03);
  }
  EXPECT_EQ(GaussianPrior(8, 5), GaussianPrior(8, 5));
  EXPECT_EQ(GaussianPrior(8, 5).size(), 16);
  EXPECT_THROW(GaussianPrior(0, 1), DomainError);
}

TEST(Parabola, FitExample) {
  const Parabola p = FitParabola({0, 0}, {2, 1}, 1.5);
  EXPECT_DOUBLE_EQ(p.a, -0.5);
  EXPECT_DOUBLE_EQ(p.k, 1.125);
  EXPECT_DOUBLE_EQ(p(2.0), 1.0);
  EXPECT_DOUBLE_EQ(p(0.0), 0.0);
}

TEST(Parabola, SwapInvariant) {
  const Parabola a = FitParabola({0.3, -0.2}, {2, 1}, 1.7);
  const Parabola b = FitParabola({2, 1}, {0.3, -0.2}, 1.7);
  EXPECT_NEAR(a.a, b.a, 1e-15);
  EXPECT_NEAR(a.k, b.k, 1e-14);
  EXPECT_EQ(a.h, b.h);
}

TEST(Parabola, DegenerateInputs) {
  EXPECT_THROW(FitParabola({1, 0}, {1, 2}, 3.0), DegenerateGeometryError);
  EXPECT_THROW(FitParabola({0, 0}, {2, 1}, 1.0), DegenerateGeometryError);
  EXPECT_THROW(AdmissibleAxisInterval({0, 1}, {2, 1}), DegenerateGeometryError);
  EXPECT_THROW(AdmissibleAxisInterval({1, 0}, {1, 2}), DegenerateGeometryError);
}

TEST(AdmissibleInterval, Examples) {
  const Interval right = AdmissibleAxisInterval({0, 0}, {2, 1});
  EXPECT_EQ(right.lo, 1.0);
  EXPECT_TRUE(std::isinf(right.hi) && right.hi > 0);
  const Interval left = AdmissibleAxisInterval({0, 0}, {-2, 1});
  EXPECT_TRUE(std::isinf(left.lo) && left.lo < 0);
  EXPECT_EQ(left.hi, -1.0);
  for (double h : {-1.01, -3.0, -50.0}) EXPECT_LT(FitParabola({0, 0}, {-2, 1}, h).a, 0.0);
}

TEST(AdmissibleInterval, MembershipOnRandomDraws) {
  Rng rng(12);
  for (int i = 0; i < 1000; ++i) {
    const Eigen::Vector2d p1(rng.Uniform(-3, 3), rng.Uniform(-3, 3));
    Eigen::Vector2d p2(rng.Uniform(-3, 3), rng.Uniform(-3, 3));
    if (std::abs(p2.x() - p1.x()) < 1e-3 || std::abs(p2.y() - p1.y()) < 1e-3) continue;
    const Interval iv = AdmissibleAxisInterval(p1, p2);
    const double finite = std::isinf(iv.lo) ? iv.hi : iv.lo;
    const double h = finite + (std::isinf(iv.lo) ? -1.0 : 1.0) * rng.Uniform(1e-3, 10.0);
    ASSERT_TRUE(iv.Contains(h));
    const Parabola p = FitParabola(p1, p2, h);
    EXPECT_LT(p.a, 0.0);
    EXPECT_NEAR(p(p1.x()), p1.y(), 1e-9);
    EXPECT_NEAR(p(p2.x()), p2.y(), 1e-9);
  }
}

TEST(NoiseStd, Values) {
  EXPECT_EQ(NoiseStd(1.0, 0.05, 0.5), 0.05);
  EXPECT_EQ(NoiseStd(0.0, 0.05, 0.5), 0.5);
  EXPECT_NEAR(NoiseStd(0.5, 0.05, 0.5), 0.275, 1e-15);
  EXPECT_THROW(NoiseStd(1.2, 0.05, 0.5), DomainError);
  EXPECT_THROW(NoiseStd(0.5, 0.6, 0.5), DomainError);
  EXPECT_THROW(NoiseStd(0.5, 0.0, 0.5), DomainError);
}

TEST(NoiseStd, AffineAndDecreasing) {
  double prev = INFINITY;
  for (int i = 0; i <= 100; ++i) {
    const double c = i / 100.0;
    const double v = NoiseStd(c, 0.05, 0.5);
    EXPECT_NEAR(v, 0.5 - 0.45 * c, 1e-15);
    EXPECT_LT(v, prev);
    prev = v;
  }
}

TEST(HeadingBands, PartitionTheCircle) {
  for (int i = 0; i < 36000; ++i) {
    const double theta = -std::numbers::pi + (i + 1) * 2.0 * std::numbers::pi / 36000.0;
    int hits = 0;
    for (int d = 0; d < kNumDecisions; ++d) hits += BandFor(static_cast<Decision>(d)).Contains(theta);
    ASSERT_EQ(hits, 1) << "theta=" << theta;
  }
  for (double deg : {15.0, -15.0, 100.0, -100.0, 180.0}) {
    int hits = 0;
    for (int d = 0; d < kNumDecisions; ++d) hits += BandFor(static_cast<Decision>(d)).Contains(deg * kDeg);
    EXPECT_EQ(hits, 1) << deg;
  }
}

TEST(HeadingBands, Classification) {
  EXPECT_EQ(ClassifyHeading(0.0), Decision::kStraight);
  EXPECT_EQ(ClassifyHeading(14.9 * kDeg), Decision::kStraight);
  EXPECT_EQ(ClassifyHeading(15.0 * kDeg), Decision::kLeftTurn);
  EXPECT_EQ(ClassifyHeading(-15.0 * kDeg), Decision::kRightTurn);
  EXPECT_EQ(ClassifyHeading(100.0 * kDeg), Decision::kUTurnLeft);
  EXPECT_EQ(ClassifyHeading(-100.0 * kDeg), Decision::kUTurnRight);
  EXPECT_EQ(ClassifyHeading(std::numbers::pi), Decision::kUTurnLeft);
  // x is to the left, so a point ahead and to the left is a left turn.
  EXPECT_EQ(ClassifyHeading(HeadingOf({1.0, 1.0})), Decision::kLeftTurn);
}

RuleHeadOutput Rule(Decision d, double length, double confidence) {
  RuleHeadOutput r;
  r.decision = d;
  r.length = length;
  r.confidence = confidence;
  return r;
}

TEST(ParabolicPrior, StraightZeroNoiseLiesOnSegment) {
  ParabolicPriorConfig c;
  c.min_std = 1e-12;
  const ParabolicSample s =
      SampleParabolicPriorDetailed(Rule(Decision::kStraight, 2.0, 1.0), 7, 8, c);
  EXPECT_NEAR(s.endpoint.x(), 0.0, 1e-9);
  EXPECT_NEAR(s.endpoint.y(), 2.0, 1e-9);
  for (int w = 0; w < 8; ++w) {
    EXPECT_NEAR(s.action[2 * w], 0.0, 1e-6);
    EXPECT_GE(s.action[2 * w + 1], -1e-9);
    EXPECT_LE(s.action[2 * w + 1], 2.0 + 1e-9);
  }
}

TEST(ParabolicPrior, RandomDrawsPassThroughEndpoints) {
  Rng rng(31);
  int parabolas = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto d = static_cast<Decision>(i % kNumDecisions);
    const RuleHeadOutput r = Rule(d, rng.Uniform(0.5, 3.0), rng.Uniform());
    const ParabolicSample s = SampleParabolicPriorDetailed(r, DeriveSeed(9, i), 8, {});
    ASSERT_TRUE(s.action.allFinite());
    EXPECT_LT(s.action.head<2>().norm(), 1e-9);
    EXPECT_LT((s.action.tail<2>() - s.endpoint).norm(), 1e-9);
    if (!s.fallback) {
      ++parabolas;
      EXPECT_LT(s.parabola.a, 0.0);
    }
  }
  EXPECT_GT(parabolas, 900);
}

TEST(ParabolicPrior, Deterministic) {
  const RuleHeadOutput r = Rule(Decision::kLeftTurn, 2.0, 0.4);
  EXPECT_EQ(SampleParabolicPrior(r, 3, 8), SampleParabolicPrior(r, 3, 8));
  EXPECT_NE(SampleParabolicPrior(r, 3, 8), SampleParabolicPrior(r, 4, 8));
}

TEST(ParabolicPrior, EndpointHeadingFollowsDecision) {
  ParabolicPriorConfig c;
  c.min_std = 1e-6;
  for (int d = 0; d < kNumDecisions; ++d) {
    const auto dec = static_cast<Decision>(d);
    const ParabolicSample s = SampleParabolicPriorDetailed(Rule(dec, 2.0, 1.0), 1, 8, c);
    EXPECT_EQ(ClassifyHeading(HeadingOf(s.endpoint)), dec) << ToString(dec);
  }
}

TEST(RuleHead, ZeroWeightsGiveUniformClasses) {
  const RuleHead head(16, 16);
  const Vector p = Vector::Zero(head.parameter_count());
  Rng rng(1);
  const RuleHeadOutput out = RuleHeadForward(head, p, rng.NormalVector(16));
  double sum = 0.0;
  for (double q : out.probs) {
    EXPECT_NEAR(q, 0.2, 1e-15);
    sum += q;
  }
  EXPECT_NEAR(sum, 1.0, 1e-12);
  EXPECT_NEAR(out.confidence, 0.2, 1e-15);
  EXPECT_NEAR(out.length, std::log(2.0), 1e-15);
}

TEST(RuleHead, OutputRanges) {
  const RuleHead head(16, 16);
  Rng rng(2);
  const Vector p = 3.0 * rng.NormalVector(head.parameter_count());
  for (int i = 0; i < 50; ++i) {
    const RuleHeadOutput out = RuleHeadForward(head, p, rng.NormalVector(16));
    EXPECT_GT(out.length, 0.0);
    EXPECT_GE(out.confidence, 0.2 - 1e-12);
    EXPECT_LE(out.confidence, 1.0);
  }
}

TEST(RuleHead, LossGradientMatchesFiniteDifferences) {
  const RuleHead head(6, 4);
  Rng rng(3);
  const Vector p = 0.3 * rng.NormalVector(head.parameter_count());
  const Matrix ctx = rng.NormalMatrix(6, 5);
  Eigen::VectorXi cls(5);
  cls << 0, 1, 2, 3, 4;
  const Matrix act = rng.NormalMatrix(4, 5);
  const Vector len = Vector::Constant(5, 1.5);
  auto loss = [&](const Vector& q) {
    return head.Loss(q, head.Forward(q, ctx), cls, act, len, 1.0, 0.7);
  };
  const RuleHead::LossResult r = loss(p);
  for (Eigen::Index i = 0; i < p.size(); i += 3) {
    Vector up = p, down = p;
    up[i] += 1e-6;
    down[i] -= 1e-6;
    EXPECT_NEAR(r.grad_params[i], (loss(up).loss - loss(down).loss) / 2e-6, 1e-6);
  }
}

TEST(RuleLoss, Values) {
  RuleHeadOutput perfect;
  perfect.probs = {0, 1, 0, 0, 0};
  const ActionSequence a = ActionSequence::LinSpaced(4, 0, 1);
  EXPECT_EQ(RuleLoss(perfect, Decision::kLeftTurn, a, a, 1.0, 1.0), 0.0);
  RuleHeadOutput uniform;
  uniform.probs = {0.2, 0.2, 0.2, 0.2, 0.2};
  EXPECT_NEAR(RuleLoss(uniform, Decision::kStraight, a, a, 1.0, 1.0), std::log(5.0), 1e-12);
  EXPECT_GE(RuleLoss(uniform, Decision::kStraight, a, a + ActionSequence::Ones(4), 0.5, 2.0), 0.0);
}

TEST(GaussianKl, Values) {
  const Vector one = Vector::Ones(1), zero = Vector::Zero(1);
  EXPECT_NEAR(DiagonalGaussianKl(one, zero, zero, zero), 0.5, 1e-15);
  Rng rng(4);
  const Vector mu = rng.NormalVector(8), lv = rng.NormalVector(8);
  EXPECT_NEAR(DiagonalGaussianKl(mu, lv, mu, lv), 0.0, 1e-15);
  EXPECT_GT(DiagonalGaussianKl(mu, lv, zero.replicate(8, 1), Vector::Zero(8)), 0.0);
}

TEST(Cvae, DeterministicSampling) {
  const Cvae cvae(16, 16);
  const Vector p = cvae.Init(1);
  Rng rng(5);
  const Vector c = rng.NormalVector(16);
  EXPECT_EQ(CvaeForward(cvae, p, c, 3), CvaeForward(cvae, p, c, 3));
  EXPECT_NE(CvaeForward(cvae, p, c, 3), CvaeForward(cvae, p, c, 4));
  EXPECT_EQ(CvaeForward(cvae, p, c, 3).size(), 16);
}

TEST(Cvae, LossGradientMatchesFiniteDifferences) {
  CvaeConfig cc;
  cc.latent_dim = 3;
  cc.hidden = {8};
  const Cvae cvae(4, 6, cc);
  Rng rng(6);
  const Vector p = cvae.Init(2) + 0.05 * rng.NormalVector(cvae.parameter_count());
  const Matrix ctx = rng.NormalMatrix(4, 5), act = rng.NormalMatrix(6, 5);
  const Cvae::LossResult r = cvae.Loss(p, ctx, act, 11);
  EXPECT_GE(r.kl, 0.0);
  EXPECT_NEAR(r.loss, r.reconstruction + r.kl, 1e-12);
  for (Eigen::Index i = 0; i < p.size(); i += 5) {
    Vector up = p, down = p;
    up[i] += 1e-6;
    down[i] -= 1e-6;
    const double fd = (cvae.Loss(up, ctx, act, 11).loss - cvae.Loss(down, ctx, act, 11).loss) / 2e-6;
    EXPECT_NEAR(r.grad_params[i], fd, 1e-6 * std::max(1.0, std::abs(fd)));
  }
}

TEST(TemporalLoss, Values) {
  const Vector truth = Vector::LinSpaced(6, 0, 10);
  EXPECT_EQ(TemporalDistanceLoss(truth, truth), 0.0);
  EXPECT_NEAR(TemporalDistanceLoss(truth + Vector::Ones(6), truth), 1.0, 1e-15);
  const double mean = truth.mean();
  const double at_mean = TemporalDistanceLoss(Vector::Constant(6, mean), truth);
  for (double c : {mean - 1.0, mean - 0.1, mean + 0.1, mean + 2.0}) {
    EXPECT_GT(TemporalDistanceLoss(Vector::Constant(6, c), truth), at_mean);
  }
  EXPECT_THROW(TemporalDistanceLoss(truth, -truth - Vector::Ones(6)), DomainError);
}

TEST(TemporalHead, LossGradientMatchesFiniteDifferences) {
  const TemporalHead head(5);
  Rng rng(7);
  const Vector p = 0.2 * rng.NormalVector(head.parameter_count());
  const Matrix ctx = rng.NormalMatrix(5, 6);
  const Vector steps = Vector::LinSpaced(6, 0, 20);
  const TemporalHead::LossResult r = head.Loss(p, ctx, steps);
  EXPECT_NEAR(r.loss, TemporalDistanceLoss(head.Predict(p, ctx), steps), 1e-12);
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    Vector up = p, down = p;
    up[i] += 1e-6;
    down[i] -= 1e-6;
    const double fd = (head.Loss(up, ctx, steps).loss - head.Loss(down, ctx, steps).loss) / 2e-6;
    EXPECT_NEAR(r.grad_params[i], fd, 1e-5 * std::max(1.0, std::abs(fd)));
  }
}

TEST(PriorConfig, RejectsBadStd) {
  const nlohmann::json inverted = {{"min_std", 0.6}, {"max_std", 0.5}};
  EXPECT_THROW((void)inverted.get<ParabolicPriorConfig>(), ConfigError);
}

}  // namespace
}  // namespace ddbm
