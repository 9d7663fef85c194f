// Copyright 2026 The ddbm Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include <gtest/gtest.h>

#include "ddbm/joint.h"
#include "ddbm/nav_policy.h"
#include "ddbm/navsim.h"

namespace ddbm {
namespace {

JointConfig SmallConfig(PriorKind prior) {
  JointConfig c;
  c.encoder_hidden = {16};
  c.denoiser.hidden = {16, 16};
  c.cvae.hidden = {16};
  c.cvae.latent_dim = 4;
  c.prior = prior;
  return c;
}

const JointBatch& Data() {
  static const JointBatch data = [] {
    CollectConfig c;
    c.episodes = 3;
    return ToJointBatch(CollectExpertData(c, 21), 2.0);
  }();
  return data;
}

JointBatch Head(int n) {
  std::vector<Eigen::Index> idx;
  for (int i = 0; i < n; ++i) idx.push_back(i);
  return SelectColumns(Data(), idx);
}

TEST(JointModel, SegmentsTileParameters) {
  for (PriorKind k : {PriorKind::kGaussian, PriorKind::kRule, PriorKind::kLearned}) {
    const JointModel m(SmallConfig(k), NoiseSchedule());
    const auto e = m.encoder_segment(), d = m.denoiser_segment(), p = m.prior_segment(),
               t = m.temporal_segment();
    EXPECT_EQ(e.offset, 0);
    EXPECT_EQ(d.offset, e.size);
    EXPECT_EQ(p.offset, d.offset + d.size);
    EXPECT_EQ(t.offset, p.offset + p.size);
    EXPECT_EQ(m.parameter_count(), t.offset + t.size);
    if (k == PriorKind::kGaussian) EXPECT_EQ(p.size, 0);
  }
}

TEST(JointModel, EncoderOutputMatchesContextDim) {
  const JointModel m(SmallConfig(PriorKind::kRule), NoiseSchedule());
  const Vector p = m.Init(1);
  const Matrix c = m.Encode(p, Head(5).observations);
  EXPECT_EQ(c.rows(), 16);
  EXPECT_EQ(c.cols(), 5);
  EXPECT_TRUE(c.allFinite());
}

TEST(JointLoss, BridgeOnlyEqualsBridgeLoss) {
  const JointModel m(SmallConfig(PriorKind::kRule), NoiseSchedule());
  const Vector p = m.Init(2);
  const JointBatch b = Head(12);
  LossWeights w;
  w.lambda_p = 0.0;
  w.lambda_d = 0.0;
  const JointModel::LossResult r = m.TotalLoss(p, b, w, 7);
  TrainingBatch tb = m.MakeBridgeBatch(p, b, 7, 1e-3);
  tb.a0 = b.actions;
  const auto d = m.denoiser_segment();
  const BridgeLossResult lb = BridgeLoss(m.denoiser(), p.segment(d.offset, d.size), tb);
  EXPECT_DOUBLE_EQ(r.total, lb.loss);
  EXPECT_DOUBLE_EQ(r.parts.bridge, lb.loss);
  EXPECT_EQ(r.grad.segment(d.offset, d.size), lb.grad_params);
  EXPECT_EQ(r.grad.segment(m.prior_segment().offset, m.prior_segment().size).squaredNorm(), 0.0);
}

TEST(JointLoss, ScalesWithBridgeWeight) {
  const JointModel m(SmallConfig(PriorKind::kGaussian), NoiseSchedule());
  const Vector p = m.Init(3);
  const JointBatch b = Head(12);
  LossWeights w;
  w.lambda_p = w.lambda_d = 0.0;
  const double one = m.TotalLoss(p, b, w, 4).total;
  w.lambda_b = 2.0;
  EXPECT_NEAR(m.TotalLoss(p, b, w, 4).total, 2.0 * one, 1e-12 * one);
}

TEST(JointLoss, TotalIsWeightedSumOfParts) {
  const JointModel m(SmallConfig(PriorKind::kLearned), NoiseSchedule());
  const Vector p = m.Init(4);
  const JointBatch b = Head(12);
  LossWeights w;
  w.lambda_b = 0.7;
  w.lambda_p = 1.3;
  w.lambda_d = 0.2;
  const JointModel::LossResult r = m.TotalLoss(p, b, w, 5);
  EXPECT_NEAR(r.total, 0.7 * r.parts.bridge + 1.3 * r.parts.prior + 0.2 * r.parts.temporal,
              1e-12 * r.total);
  // Each one-hot weighting isolates one component.
  for (int k = 0; k < 3; ++k) {
    LossWeights one{0.0, 0.0, 0.0, 1.0, 1.0};
    (k == 0 ? one.lambda_b : k == 1 ? one.lambda_p : one.lambda_d) = 1.0;
    const double part = k == 0 ? r.parts.bridge : k == 1 ? r.parts.prior : r.parts.temporal;
    EXPECT_DOUBLE_EQ(m.TotalLoss(p, b, one, 5).total, part);
  }
}

void CheckGradient(const JointModel& m, const LossWeights& w, std::uint64_t seed) {
  const Vector p = m.Init(seed);
  const JointBatch b = Head(8);
  const Vector g = m.TotalLoss(p, b, w, seed).grad;
  const double h = 1e-6;
  for (Eigen::Index i = 0; i < p.size(); i += 17) {
    Vector up = p, down = p;
    up[i] += h;
    down[i] -= h;
    const double fd = (m.TotalLoss(up, b, w, seed).total - m.TotalLoss(down, b, w, seed).total) / (2 * h);
    EXPECT_NEAR(g[i], fd, 1e-5 * std::max(1.0, std::abs(fd))) << "coordinate " << i;
  }
}

TEST(JointLoss, GradientWithGaussianPrior) {
  LossWeights w;
  w.lambda_p = 0.0;
  CheckGradient(JointModel(SmallConfig(PriorKind::kGaussian), NoiseSchedule()), w, 6);
}

// The bridge term samples aT from the prior head, so with a parametric prior
// the weight on it is zeroed to keep the loss smooth in every coordinate.
TEST(JointLoss, GradientWithRulePrior) {
  LossWeights w;
  w.lambda_b = 0.0;
  CheckGradient(JointModel(SmallConfig(PriorKind::kRule), NoiseSchedule()), w, 7);
}

TEST(JointLoss, GradientWithLearnedPrior) {
  LossWeights w;
  w.lambda_b = 0.0;
  CheckGradient(JointModel(SmallConfig(PriorKind::kLearned), NoiseSchedule()), w, 8);
}

TEST(JointLoss, MaskZeroesSegments) {
  const JointModel m(SmallConfig(PriorKind::kRule), NoiseSchedule());
  const Vector p = m.Init(9);
  SegmentMask mask;
  mask.encoder = mask.prior = mask.temporal = false;
  const Vector g = m.TotalLoss(p, Head(8), LossWeights{}, 1, 1e-3, mask).grad;
  const auto d = m.denoiser_segment();
  EXPECT_EQ(g.head(d.offset).squaredNorm(), 0.0);
  EXPECT_EQ(g.tail(g.size() - d.offset - d.size).squaredNorm(), 0.0);
  EXPECT_GT(g.segment(d.offset, d.size).squaredNorm(), 0.0);
}

TEST(TrainJoint, StageOneLeavesDenoiserUntouched) {
  const JointModel m(SmallConfig(PriorKind::kRule), NoiseSchedule());
  const Vector p = m.Init(10);
  TrainerConfig t;
  t.two_stage = true;
  t.prior_steps = 5;
  t.steps = 0;
  t.batch_size = 8;
  t.log_every = 1;
  AdamConfig o;
  o.lr = 1e-3;
  const JointTrainResult r = TrainJoint(m, Data(), t, o, LossWeights{}, p);
  const auto d = m.denoiser_segment();
  EXPECT_EQ(r.params.segment(d.offset, d.size), p.segment(d.offset, d.size));
  EXPECT_NE(r.params.head(d.offset), p.head(d.offset));
  ASSERT_EQ(r.metrics.size(), 5u);
  for (const MetricsRow& row : r.metrics) {
    EXPECT_NEAR(row.total, row.prior + 0.1 * row.temporal, 1e-12 * row.total);
  }
}

TEST(TrainJoint, StageTwoTrainsOnlyDenoiser) {
  const JointModel m(SmallConfig(PriorKind::kLearned), NoiseSchedule());
  const Vector p = m.Init(11);
  TrainerConfig t;
  t.two_stage = true;
  t.prior_steps = 3;
  t.steps = 4;
  t.batch_size = 8;
  AdamConfig o;
  o.lr = 1e-3;
  TrainerConfig first = t;
  first.steps = 0;
  const Vector after_one = TrainJoint(m, Data(), first, o, LossWeights{}, p).params;
  const Vector after_two = TrainJoint(m, Data(), t, o, LossWeights{}, p).params;
  const auto d = m.denoiser_segment();
  EXPECT_EQ(after_two.head(d.offset), after_one.head(d.offset));
  EXPECT_EQ(after_two.tail(after_two.size() - d.offset - d.size),
            after_one.tail(after_one.size() - d.offset - d.size));
  EXPECT_NE(after_two.segment(d.offset, d.size), after_one.segment(d.offset, d.size));
}

TEST(TrainJoint, Reproducible) {
  const JointModel m(SmallConfig(PriorKind::kGaussian), NoiseSchedule());
  TrainerConfig t;
  t.steps = 6;
  t.batch_size = 8;
  AdamConfig o;
  const Vector p = m.Init(12);
  EXPECT_EQ(TrainJoint(m, Data(), t, o, LossWeights{}, p).params,
            TrainJoint(m, Data(), t, o, LossWeights{}, p).params);
  EXPECT_THROW(TrainJoint(m, Data(), t, o, LossWeights{}, p.head(3)), ShapeError);
}

}  // namespace
}  // namespace ddbm
