// Copyright 2026 The ddbm Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance run. Prints one PASS/FAIL line per criterion plus info lines and
// exits nonzero when any criterion fails. Optional arguments select criteria
// by number, e.g. `ddbm_acceptance 1 3 8`.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ddbm/bridge.h"
#include "ddbm/config.h"
#include "ddbm/ddpm.h"
#include "ddbm/denoiser.h"
#include "ddbm/film_mlp.h"
#include "ddbm/log.h"
#include "ddbm/nav_policy.h"
#include "ddbm/priors.h"
#include "ddbm/random.h"
#include "ddbm/sampler.h"
#include "ddbm/toybench.h"
#include "oracles.h"

namespace ddbm {
namespace {

namespace fs = std::filesystem;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string Fmt(const char* fmt, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, a);
  return buf;
}

void Info(int n, const std::string& msg) { std::printf("  info %d: %s\n", n, msg.c_str()); }

Vector Scalar(double v) { return Vector::Constant(1, v); }

NoiseSchedule VpSchedule() {
  ScheduleConfig c;
  c.kind = ScheduleKind::kVP;
  return NoiseSchedule(c);
}

// 1. Pinning at T and agreement with a rejection-sampled bridge.
Outcome Criterion1() {
  Rng rng(1);
  double worst_pin = 0.0;
  double worst_std = 0.0;
  for (const NoiseSchedule& s : {NoiseSchedule(), VpSchedule()}) {
    for (int i = 0; i < 100; ++i) {
      const Vector a0 = rng.NormalVector(16), aT = rng.NormalVector(16);
      const BridgeMarginal m = ComputeBridgeMarginal(s, a0, aT, s.horizon());
      worst_pin = std::max(worst_pin, (m.mean - aT).cwiseAbs().maxCoeff());
      worst_std = std::max(worst_std, std::abs(m.std));
    }
  }
  const NoiseSchedule ve;
  bool oracle_ok = true;
  std::string oracle_detail;
  const double cases[][3] = {{0.0, 1.0, 0.5}, {0.3, -0.8, 0.25}, {-1.0, 0.5, 0.8}};
  for (int c = 0; c < 3; ++c) {
    const double a0 = cases[c][0], aT = cases[c][1], t = cases[c][2];
    const BridgeMarginal m = ComputeBridgeMarginal(ve, Scalar(a0), Scalar(aT), t);
    const oracle::MonteCarloMoments mc =
        oracle::RejectionBridge(a0, aT, t, 1.0, 0.01, 4'000'000, 100 + c);
    const double zm = std::abs(mc.mean - m.mean[0]) / mc.mean_se;
    const double zs = std::abs(mc.std - m.std) / mc.std_se;
    oracle_ok = oracle_ok && mc.accepted > 10000 && zm < 3.0 && zs < 3.0;
    Info(1, "t=" + Fmt("%.2f", t) + " mean z=" + Fmt("%.2f", zm) + " std z=" + Fmt("%.2f", zs) +
                " accepted=" + std::to_string(mc.accepted));
  }
  Outcome o;
  o.pass = worst_pin <= 1e-12 && worst_std == 0.0 && oracle_ok;
  o.detail = "max |mean(T) - aT| = " + Fmt("%.1e", worst_pin) + ", rejection oracle within 3 SE: " +
             (oracle_ok ? "yes" : "no");
  return o;
}

// 2. Score against finite differences of the Gaussian log-density, and the
// denoiser network gradient check.
Outcome Criterion2() {
  Rng rng(2);
  double worst_score = 0.0;
  for (int i = 0; i < 100; ++i) {
    const NoiseSchedule s = (i % 2 == 0) ? NoiseSchedule() : VpSchedule();
    const double t = rng.Uniform(0.05, 0.95);
    const Vector a0 = rng.NormalVector(16), aT = rng.NormalVector(16);
    const BridgeMarginal m = ComputeBridgeMarginal(s, a0, aT, t);
    const Vector at = m.mean + m.std * rng.NormalVector(16);
    const Vector got = ScoreFromDenoiser(s, at, t, aT, a0);
    const Vector fd = oracle::FiniteDiffGaussianScore(at, m.mean, m.std * m.std, 1e-5 * m.std);
    worst_score = std::max(worst_score, (got - fd).norm() / std::max(got.norm(), 1e-12));
  }
  DenoiserConfig dc;
  const FilmMlp net(DenoiserNetworkSpec(dc));
  double worst_grad = 0.0;
  for (int draw = 0; draw < 10; ++draw) {
    const Vector p = net.Init(draw) + 0.1 * rng.NormalVector(net.parameter_count());
    const Matrix x = rng.NormalMatrix(net.spec().input_dim, 4);
    const Vector tau = rng.NormalVector(4);
    const Matrix ctx = rng.NormalMatrix(dc.context_dim, 4);
    worst_grad = std::max(worst_grad, FiniteDiffCheck(net, p, x, tau, ctx, 1e-5, draw));
  }
  Outcome o;
  o.pass = worst_score < 1e-6 && worst_grad < 1e-5;
  o.detail = "score rel. error " + Fmt("%.2e", worst_score) + " (< 1e-6), finite_diff_check " +
             Fmt("%.2e", worst_grad) + " (< 1e-5)";
  return o;
}

// 3. ODE sampling with the exact denoiser.
Outcome Criterion3() {
  const NoiseSchedule schedule;
  Rng rng(3);
  const Matrix a0 = rng.NormalMatrix(1, 100);
  const Matrix aT = rng.NormalMatrix(1, 100);
  const OracleDenoiser oracle(a0);
  std::vector<double> errors;
  std::string row;
  for (int k : {2, 5, 10, 20, 40}) {
    SamplerOptions opt;
    opt.steps = k;
    opt.mode = SampleMode::kOde;
    opt.keep_trace = false;
    errors.push_back((Sample(oracle, schedule, aT, opt).final_state - a0).cwiseAbs().mean());
    row += " k=" + std::to_string(k) + ":" + Fmt("%.2e", errors.back());
  }
  bool monotone = true;
  for (std::size_t i = 1; i < errors.size(); ++i) monotone = monotone && errors[i] < errors[i - 1];
  Outcome o;
  o.pass = errors.back() < 1e-3 && monotone;
  o.detail = "mean |final - a0|" + row + (monotone ? ", decreasing" : ", NOT decreasing");
  return o;
}

ToyConfig TranslationConfig(double offset, std::uint64_t seed) {
  ToyConfig c;
  c.generator = Generator::kShiftedClusters;
  c.offset = offset;
  c.seed = seed;
  c.trainer.steps = 5000;
  c.trainer.batch_size = 64;
  c.optimizer.lr = 2e-3;
  c.optimizer.cosine_decay = true;
  c.sampler.steps = 10;
  c.sampler.mode = SampleMode::kOde;
  return c;
}

// 4. EMD after translation grows with the offset; large reduction at 1.
Outcome Criterion4() {
  const std::vector<double> offsets{0.5, 1.0, 2.0, 4.0};
  bool all_positive = true;
  double worst_reduction = INFINITY;
  std::string rhos;
  for (std::uint64_t seed : {0u, 1u, 2u}) {
    std::vector<double> result;
    std::string row;
    for (double off : offsets) {
      const TranslationMetrics m = RunTranslationExperiment(TranslationConfig(off, seed));
      result.push_back(m.emd_result_target);
      row += " " + Fmt("%.1f", off) + ":" + Fmt("%.3f", m.emd_result_target) + "/" +
             Fmt("%.3f", m.emd_source_target);
      if (off == 1.0) {
        worst_reduction = std::min(worst_reduction, m.emd_source_target / m.emd_result_target);
      }
    }
    const double rho = Spearman(offsets, result);
    all_positive = all_positive && rho > 0.0;
    rhos += " " + Fmt("%.2f", rho);
    Info(4, "seed " + std::to_string(seed) + " result/source EMD" + row);
  }
  Outcome o;
  o.pass = all_positive && worst_reduction >= 5.0;
  o.detail = "Spearman rho per seed" + rhos + " (each > 0), offset-1 reduction " +
             Fmt("%.2f", worst_reduction) + "x (>= 5x, worst seed)";
  return o;
}

// 5. KL(source || target) against translation MSE over Gaussian pairs.
Outcome Criterion5() {
  ToyConfig c;
  c.pairing = Pairing::kIndependent;
  c.data_scale = 1.0;
  c.trainer.steps = 6000;
  c.optimizer.lr = 1e-4;
  c.optimizer.cosine_decay = false;
  c.sampler.mode = SampleMode::kSde;
  std::vector<GaussianPair> pairs;
  for (double d : {0.0, 0.1, 0.2, 0.4, 0.7, 1.0, 1.4}) {
    GaussianPair g;
    g.cov_source = g.cov_target = 0.25 * Eigen::Matrix2d::Identity();
    g.mu_source = {d, 0.0};
    pairs.push_back(g);
  }
  const ErrorBoundResult r = ErrorBoundExperiment(c, pairs);
  double min_kl = INFINITY, max_kl = 0.0;
  for (const ErrorBoundPoint& p : r.points) {
    Info(5, "KL " + Fmt("%.4f", p.kl) + " MSE " + Fmt("%.4f", p.mse));
    if (p.kl > 0.0) min_kl = std::min(min_kl, p.kl);
    max_kl = std::max(max_kl, p.kl);
  }
  const double span = max_kl / min_kl;
  Outcome o;
  o.pass = r.points.size() >= 5 && span >= 100.0 && r.pearson > 0.9;
  o.detail = "Pearson " + Fmt("%.4f", r.pearson) + " over " + std::to_string(r.points.size()) +
             " pairs (> 0.9), nonzero KL span " + Fmt("%.0f", span) + "x";
  return o;
}

// 6. k=10 -> k=1 degradation of the bridge against a DDPM baseline.
Outcome Criterion6() {
  ToyConfig c;
  c.generator = Generator::kEightGaussians;
  c.offset = 0.0;
  c.trainer.steps = 8000;
  c.optimizer.lr = 5e-4;
  c.optimizer.cosine_decay = true;
  DdpmConfig d;
  d.clip = 2.5;
  TrainerConfig dt;
  dt.steps = 8000;
  AdamConfig da;
  da.lr = 5e-4;
  const FewStepResult r = FewStepComparison(c, d, dt, da, {10, 1});
  const double bridge = r.bridge_emd[1] / r.bridge_emd[0];
  const double ddpm = r.ddpm_emd[1] / r.ddpm_emd[0];
  Info(6, "bridge EMD k=10 " + Fmt("%.3f", r.bridge_emd[0]) + " k=1 " + Fmt("%.3f", r.bridge_emd[1]) +
              "; DDPM k=10 " + Fmt("%.3f", r.ddpm_emd[0]) + " k=1 " + Fmt("%.3f", r.ddpm_emd[1]) +
              "; source " + Fmt("%.3f", r.emd_source_target));
  Outcome o;
  o.pass = bridge < ddpm;
  o.detail = "EMD ratio k=1/k=10: bridge " + Fmt("%.2f", bridge) + " < DDPM " + Fmt("%.2f", ddpm);
  return o;
}

// 7. Navigation comparison on held-out layouts.
Outcome Criterion7() {
  const nlohmann::json root = ReadJsonFile(fs::path(DDBM_CONFIG_DIR) / "nav.json");
  NavExperimentConfig config = NavExperimentConfigFromJson(root);
  const NavExperimentResult r = RunNavExperiment(config);
  auto rate = [&](PriorKind k, const char* stage) -> double {
    for (const NavEvalRow& row : r.rows) {
      if (row.prior == ToString(k) && row.stage == stage) return row.success_rate;
    }
    return NAN;
  };
  for (const NavEvalRow& row : r.rows) {
    Info(7, row.variant + " success " + Fmt("%.3f", row.success_rate) + " collisions " +
                Fmt("%.3f", row.mean_collisions) + " length " + Fmt("%.2f", row.mean_length) +
                " episodes " + std::to_string(row.episodes));
  }
  for (std::size_t i = 0; i < config.priors.size() && i < r.prior_mse.size(); ++i) {
    Info(7, "prior " + ToString(config.priors[i]) + " minimal MSE " + Fmt("%.4f", r.prior_mse[i]));
  }
  bool improves = true;
  for (PriorKind k : config.priors) improves = improves && rate(k, "target") > rate(k, "source");
  const double learned = rate(PriorKind::kLearned, "target");
  const double gaussian = rate(PriorKind::kGaussian, "target");
  const double rule = rate(PriorKind::kRule, "target");
  const double gaussian_source = rate(PriorKind::kGaussian, "source");
  // "Comparable" is read as within five points of success rate.
  const bool ordering = learned >= gaussian && gaussian >= rule - 0.05;
  Outcome o;
  o.pass = improves && ordering && gaussian_source <= 0.05 && config.eval_layouts == 200;
  o.detail = "target > source for every prior: " + std::string(improves ? "yes" : "no") +
             "; target success learned " + Fmt("%.3f", learned) + " >= gaussian " +
             Fmt("%.3f", gaussian) + " >= rule " + Fmt("%.3f", rule) + " - 0.05; gaussian source " +
             Fmt("%.3f", gaussian_source) + " (<= 0.05)";
  return o;
}

// 8. Parabolic prior geometry.
Outcome Criterion8() {
  Rng rng(8);
  double worst = 0.0;
  int parabolas = 0, concave = 0;
  for (int i = 0; i < 1000; ++i) {
    RuleHeadOutput rule;
    rule.decision = static_cast<Decision>(i % kNumDecisions);
    rule.length = rng.Uniform(0.5, 3.0);
    rule.confidence = rng.Uniform();
    const ParabolicSample s = SampleParabolicPriorDetailed(rule, DeriveSeed(8, i), 8, {});
    worst = std::max(worst, s.action.head<2>().norm());
    worst = std::max(worst, (s.action.tail<2>() - s.endpoint).norm());
    if (!s.fallback) {
      ++parabolas;
      concave += s.parabola.a < 0.0;
      worst = std::max(worst, std::abs(s.parabola(0.0)));
      worst = std::max(worst, std::abs(s.parabola(s.endpoint.x()) - s.endpoint.y()));
    }
  }
  const bool bounds = NoiseStd(1.0, 0.05, 0.5) == 0.05 && NoiseStd(0.0, 0.05, 0.5) == 0.5;
  Info(8, std::to_string(1000 - parabolas) + " draws used the straight-segment fallback");
  Outcome o;
  o.pass = worst < 1e-9 && concave == parabolas && parabolas > 0 && bounds;
  o.detail = "max membership error " + Fmt("%.1e", worst) + " (< 1e-9), a < 0 on " +
             std::to_string(concave) + "/" + std::to_string(parabolas) +
             " parabolas, noise_std boundaries exact: " + (bounds ? "yes" : "no");
  return o;
}

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int RunCli(const fs::path& out, const std::string& args) {
  const std::string cmd = std::string("\"") + DDBM_CLI_PATH + "\" --out \"" + out.string() +
                          "\" " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// 9. Every command twice with the same config and seed.
Outcome Criterion9() {
  const fs::path root = fs::temp_directory_path() / "ddbm_acceptance_determinism";
  fs::remove_all(root);
  const fs::path configs = DDBM_CONFIG_DIR;
  const std::string toy = "\"" + (configs / "toy_quick.json").string() + "\"";
  const std::string nav = "\"" + (configs / "nav_quick.json").string() + "\"";
  struct Command {
    std::string name, args, csv;
  };
  auto ck = [&](const char* run, const char* dir) {
    return "\"" + (root / (std::string(dir) + run) / "checkpoint.json").string() + "\"";
  };
  bool ok = true;
  int compared = 0;
  for (const char* run : {"a", "b"}) {
    const std::vector<Command> commands{
        {"toy_train", "train " + toy, "metrics.csv"},
        {"toy_sample_ode", "sample " + ck(run, "toy_train"), "trace.csv"},
        {"toy_sample_sde", "sample --mode sde -n 4 " + ck(run, "toy_train"), "trace.csv"},
        {"eval_toy", "eval-toy " + toy, "translation.csv"},
        {"nav_train", "train " + nav, "metrics.csv"},
        {"nav_sample", "sample -n 2 " + ck(run, "nav_train"), "trace.csv"},
        {"eval_nav", "eval-nav " + nav, "nav_eval.csv"},
        {"prior_dump", "prior-dump -n 20", "prior.csv"},
        {"prior_dump_nav", "prior-dump -n 5 --checkpoint " + ck(run, "nav_train"), "prior.csv"},
    };
    for (const Command& c : commands) {
      const int rc = RunCli(root / (c.name + run), c.args);
      if (rc != 0) {
        ok = false;
        Info(9, c.name + " exited with " + std::to_string(rc));
      }
      if (std::string(run) == "b") {
        const std::string x = Slurp(root / (c.name + "a") / c.csv);
        const std::string y = Slurp(root / (c.name + "b") / c.csv);
        const bool same = !x.empty() && x == y;
        ok = ok && same;
        ++compared;
        Info(9, c.name + "/" + c.csv + (same ? " identical" : " DIFFERS") + " (" +
                    std::to_string(x.size()) + " bytes)");
        // Checkpoints carry no timestamp, so they must match as well.
        if (c.name.ends_with("train")) {
          const bool ck_same = Slurp(root / (c.name + "a") / "checkpoint.json") ==
                               Slurp(root / (c.name + "b") / "checkpoint.json");
          ok = ok && ck_same;
          if (!ck_same) Info(9, c.name + "/checkpoint.json DIFFERS");
        }
      }
    }
  }
  fs::remove_all(root);
  Outcome o;
  o.pass = ok;
  o.detail = std::to_string(compared) + " command outputs compared byte for byte";
  return o;
}

}  // namespace
}  // namespace ddbm

int main(int argc, char** argv) {
  using namespace ddbm;
  const std::vector<std::function<Outcome()>> criteria{
      Criterion1, Criterion2, Criterion3, Criterion4, Criterion5,
      Criterion6, Criterion7, Criterion8, Criterion9};
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  SetLogLevel(LogLevel::kError);
  int failures = 0;
  for (int n = 1; n <= static_cast<int>(criteria.size()); ++n) {
    if (!only.empty() && !only.count(n)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[n - 1]();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("threw: ") + e.what();
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("%s criterion %d: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", n, o.detail.c_str(), secs);
    std::fflush(stdout);
    failures += !o.pass;
  }
  return failures == 0 ? 0 : 1;
}
