// Copyright 2026 The ddbm Authors
// SPDX-License-Identifier: Apache-2.0

#include "ddbm/navsim.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <nlohmann/json.hpp>

#include "ddbm/config.h"
#include "ddbm/parallel.h"
#include "ddbm/priors.h"
#include "ddbm/random.h"

namespace ddbm {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kMaxLayoutAttempts = 100;
constexpr int kMaxPlacementTries = 400;

double SegmentDistance(const Eigen::Vector2d& p, const Eigen::Vector2d& a,
                       const Eigen::Vector2d& b) {
  const Eigen::Vector2d d = b - a;
  const double len2 = d.squaredNorm();
  double s = len2 > 0.0 ? (p - a).dot(d) / len2 : 0.0;
  s = std::clamp(s, 0.0, 1.0);
  return (a + s * d - p).norm();
}

Eigen::Vector2d Rotate(const Eigen::Vector2d& v, double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  return {c * v.x() - s * v.y(), s * v.x() + c * v.y()};
}

double WrapAngle(double a) {
  return std::remainder(a, 2.0 * std::numbers::pi);
}

bool TryLayout(Rng& rng, Difficulty difficulty, const WorldConfig& config,
               WorldLayout& world) {
  const double h = config.half_extent;
  const double rotation = 0.5 * std::numbers::pi * static_cast<double>(rng.Index(4));
  const double edge = h - 0.8;
  const double span = h - 1.0;
  world.start.position =
      Rotate(Eigen::Vector2d(rng.Uniform(-span, span), -edge), rotation);
  world.goal = Rotate(Eigen::Vector2d(rng.Uniform(-span, span), edge), rotation);
  if ((world.goal - world.start.position).norm() < config.min_start_goal) {
    return false;
  }
  const Eigen::Vector2d to_goal = world.goal - world.start.position;
  world.start.heading = WrapAngle(std::atan2(to_goal.y(), to_goal.x()) +
                                  rng.Uniform(-0.5, 0.5) * std::numbers::pi);
  world.obstacles.clear();
  if (difficulty == Difficulty::kOpen) return true;

  const int count = config.min_obstacles +
                    static_cast<int>(rng.Index(static_cast<std::size_t>(
                        config.max_obstacles - config.min_obstacles + 1)));
  const double pad = config.robot_radius + config.margin;
  for (int tries = 0; tries < kMaxPlacementTries &&
                      static_cast<int>(world.obstacles.size()) < count;
       ++tries) {
    Circle c;
    c.radius = rng.Uniform(config.min_radius, config.max_radius);
    c.center = Rotate(
        Eigen::Vector2d(rng.Uniform(-edge, edge), rng.Uniform(-span, span)),
        rotation);
    const double inflated = c.radius + pad;
    bool ok = (c.center - world.start.position).norm() > inflated + 0.3 &&
              (c.center - world.goal).norm() > inflated + 0.3;
    for (const Circle& o : world.obstacles) {
      if (!ok) break;
      ok = (c.center - o.center).norm() > inflated + o.radius + pad + 0.1;
    }
    if (ok) world.obstacles.push_back(c);
  }
  return static_cast<int>(world.obstacles.size()) == count;
}

}  // namespace

Difficulty ParseDifficulty(const std::string& name) {
  if (name == "Open" || name == "open") return Difficulty::kOpen;
  if (name == "Cluttered" || name == "cluttered") return Difficulty::kCluttered;
  throw ConfigError("unknown difficulty '" + name + "'");
}

std::string ToString(Difficulty d) {
  return d == Difficulty::kOpen ? "Open" : "Cluttered";
}

void to_json(nlohmann::json& j, const WorldConfig& c) {
  j = nlohmann::json{{"half_extent", c.half_extent},
                     {"min_obstacles", c.min_obstacles},
                     {"max_obstacles", c.max_obstacles},
                     {"min_radius", c.min_radius},
                     {"max_radius", c.max_radius},
                     {"robot_radius", c.robot_radius},
                     {"margin", c.margin},
                     {"polygon_sides", c.polygon_sides},
                     {"min_start_goal", c.min_start_goal}};
}

void from_json(const nlohmann::json& j, WorldConfig& c) {
  c.half_extent = GetOr(j, "half_extent", c.half_extent, "world");
  c.min_obstacles = GetOr(j, "min_obstacles", c.min_obstacles, "world");
  c.max_obstacles = GetOr(j, "max_obstacles", c.max_obstacles, "world");
  c.min_radius = GetOr(j, "min_radius", c.min_radius, "world");
  c.max_radius = GetOr(j, "max_radius", c.max_radius, "world");
  c.robot_radius = GetOr(j, "robot_radius", c.robot_radius, "world");
  c.margin = GetOr(j, "margin", c.margin, "world");
  c.polygon_sides = GetOr(j, "polygon_sides", c.polygon_sides, "world");
  c.min_start_goal = GetOr(j, "min_start_goal", c.min_start_goal, "world");
  if (c.min_obstacles < 0 || c.max_obstacles < c.min_obstacles) {
    throw ConfigError("world: need 0 <= min_obstacles <= max_obstacles");
  }
  if (!(c.min_radius > 0.0) || c.max_radius < c.min_radius) {
    throw ConfigError("world: need 0 < min_radius <= max_radius");
  }
  if (c.polygon_sides < 6) throw ConfigError("world.polygon_sides must be >= 6");
}

void to_json(nlohmann::json& j, const WorldLayout& w) {
  nlohmann::json obstacles = nlohmann::json::array();
  for (const Circle& c : w.obstacles) {
    obstacles.push_back({{"x", c.center.x()}, {"y", c.center.y()}, {"r", c.radius}});
  }
  j = nlohmann::json{{"half_extent", w.half_extent},
                     {"seed", w.seed},
                     {"start",
                      {{"x", w.start.position.x()},
                       {"y", w.start.position.y()},
                       {"heading", w.start.heading}}},
                     {"goal", {{"x", w.goal.x()}, {"y", w.goal.y()}}},
                     {"obstacles", obstacles}};
}

void from_json(const nlohmann::json& j, WorldLayout& w) {
  w.half_extent = GetOr(j, "half_extent", w.half_extent, "layout");
  w.seed = GetOr<std::uint64_t>(j, "seed", 0, "layout");
  const nlohmann::json& s = RequireSection(j, "start");
  w.start.position = {GetOr(s, "x", 0.0, "layout.start"),
                      GetOr(s, "y", 0.0, "layout.start")};
  w.start.heading = GetOr(s, "heading", 0.0, "layout.start");
  const nlohmann::json& g = RequireSection(j, "goal");
  w.goal = {GetOr(g, "x", 0.0, "layout.goal"), GetOr(g, "y", 0.0, "layout.goal")};
  w.obstacles.clear();
  if (j.contains("obstacles")) {
    for (const nlohmann::json& o : j.at("obstacles")) {
      Circle c;
      c.center = {GetOr(o, "x", 0.0, "layout.obstacles"),
                  GetOr(o, "y", 0.0, "layout.obstacles")};
      c.radius = GetOr(o, "r", 0.0, "layout.obstacles");
      if (!(c.radius > 0.0)) throw ConfigError("layout.obstacles: radius must be positive");
      w.obstacles.push_back(c);
    }
  }
}

WorldLayout GenerateLayout(std::uint64_t seed, Difficulty difficulty,
                           const WorldConfig& config) {
  for (int attempt = 0; attempt < kMaxLayoutAttempts; ++attempt) {
    Rng rng(DeriveSeed(seed, static_cast<std::uint64_t>(attempt),
                       static_cast<std::uint64_t>(difficulty)));
    WorldLayout world;
    world.half_extent = config.half_extent;
    world.seed = seed;
    if (!TryLayout(rng, difficulty, config, world)) continue;
    try {
      ExpertPlanner planner(world, config);
      planner.ShortestPath(world.start.position);
    } catch (const InfeasibleError&) {
      continue;
    }
    return world;
  }
  throw InfeasibleError("generate_layout: no feasible layout after " +
                        std::to_string(kMaxLayoutAttempts) + " attempts");
}

Eigen::Vector2d WorldToRobot(const Pose& pose, const Eigen::Vector2d& world) {
  const Eigen::Vector2d d = world - pose.position;
  const Eigen::Vector2d forward(std::cos(pose.heading), std::sin(pose.heading));
  const Eigen::Vector2d left(-forward.y(), forward.x());
  return {d.dot(left), d.dot(forward)};
}

Eigen::Vector2d RobotToWorld(const Pose& pose, const Eigen::Vector2d& local) {
  const Eigen::Vector2d forward(std::cos(pose.heading), std::sin(pose.heading));
  const Eigen::Vector2d left(-forward.y(), forward.x());
  return pose.position + local.x() * left + local.y() * forward;
}

double Clearance(const WorldLayout& world, const Eigen::Vector2d& p) {
  double best = kInf;
  for (const Circle& c : world.obstacles) {
    best = std::min(best, (p - c.center).norm() - c.radius);
  }
  return best;
}

double FirstContact(const WorldLayout& world, const Eigen::Vector2d& a,
                    const Eigen::Vector2d& b, double inflate) {
  const Eigen::Vector2d d = b - a;
  const double dd = d.squaredNorm();
  double best = kInf;
  for (const Circle& c : world.obstacles) {
    const double r = c.radius + inflate;
    const Eigen::Vector2d f = a - c.center;
    const double cc = f.squaredNorm() - r * r;
    const double bb = f.dot(d);
    if (cc < 0.0) {
      // Already overlapping: only moves that go deeper count.
      if (bb < 0.0) best = 0.0;
      continue;
    }
    if (dd == 0.0 || bb >= 0.0) continue;
    const double disc = bb * bb - dd * cc;
    if (disc < 0.0) continue;
    const double s = (-bb - std::sqrt(disc)) / dd;
    if (s >= 0.0 && s <= 1.0) best = std::min(best, s);
  }
  return best;
}

void to_json(nlohmann::json& j, const ExpertConfig& c) {
  j = nlohmann::json{{"n_waypoints", c.n_waypoints}, {"spacing", c.spacing}};
}

void from_json(const nlohmann::json& j, ExpertConfig& c) {
  c.n_waypoints = GetOr(j, "n_waypoints", c.n_waypoints, "expert");
  c.spacing = GetOr(j, "spacing", c.spacing, "expert");
  if (c.n_waypoints < 2) throw ConfigError("expert.n_waypoints must be >= 2");
  if (!(c.spacing > 0.0)) throw ConfigError("expert.spacing must be positive");
}

ExpertPlanner::ExpertPlanner(const WorldLayout& world, const WorldConfig& config)
    : world_(&world) {
  const int m = config.polygon_sides;
  const double pad = config.robot_radius + config.margin;
  const double stretch = 1.0 / std::cos(std::numbers::pi / m);
  for (const Circle& c : world.obstacles) inflated_.push_back(c.radius + pad);
  for (std::size_t i = 0; i < world.obstacles.size(); ++i) {
    for (int k = 0; k < m; ++k) {
      const double phi = 2.0 * std::numbers::pi * k / m;
      const Eigen::Vector2d v =
          world.obstacles[i].center +
          inflated_[i] * stretch * Eigen::Vector2d(std::cos(phi), std::sin(phi));
      bool free = true;
      for (std::size_t o = 0; o < world.obstacles.size() && free; ++o) {
        free = (v - world.obstacles[o].center).norm() >= inflated_[o];
      }
      if (free) nodes_.push_back(v);
    }
  }
  nodes_.push_back(world.goal);

  // Dense Dijkstra from the goal.
  const std::size_t n = nodes_.size();
  const int goal = static_cast<int>(n) - 1;
  dist_.assign(n, kInf);
  next_.assign(n, -1);
  std::vector<bool> done(n, false);
  dist_[goal] = 0.0;
  for (std::size_t iter = 0; iter < n; ++iter) {
    int u = -1;
    for (std::size_t v = 0; v < n; ++v) {
      if (!done[v] && (u < 0 || dist_[v] < dist_[u])) u = static_cast<int>(v);
    }
    if (u < 0 || dist_[u] == kInf) break;
    done[u] = true;
    for (std::size_t v = 0; v < n; ++v) {
      if (done[v]) continue;
      const double w = (nodes_[v] - nodes_[u]).norm();
      if (dist_[u] + w < dist_[v] && Visible(nodes_[u], nodes_[v])) {
        dist_[v] = dist_[u] + w;
        next_[v] = u;
      }
    }
  }
}

bool ExpertPlanner::Visible(const Eigen::Vector2d& a,
                            const Eigen::Vector2d& b) const {
  for (std::size_t i = 0; i < inflated_.size(); ++i) {
    if (SegmentDistance(world_->obstacles[i].center, a, b) < inflated_[i] - 1e-9) {
      return false;
    }
  }
  return true;
}

Eigen::Vector2d ExpertPlanner::Escape(const Eigen::Vector2d& p) const {
  for (std::size_t i = 0; i < inflated_.size(); ++i) {
    const Eigen::Vector2d d = p - world_->obstacles[i].center;
    const double r = d.norm();
    if (r < inflated_[i] - 1e-9) {
      const Eigen::Vector2d dir =
          r > 1e-12 ? Eigen::Vector2d(d / r) : Eigen::Vector2d(1.0, 0.0);
      return world_->obstacles[i].center + (inflated_[i] + 1e-6) * dir;
    }
  }
  return p;
}

std::vector<Eigen::Vector2d> ExpertPlanner::ShortestPath(
    const Eigen::Vector2d& from) const {
  std::vector<Eigen::Vector2d> path{from};
  const Eigen::Vector2d p = Escape(from);
  if ((p - from).norm() > 0.0) path.push_back(p);
  const Eigen::Vector2d& goal = nodes_.back();
  if (Visible(p, goal)) {
    path.push_back(goal);
    return path;
  }
  int best = -1;
  double best_cost = kInf;
  for (std::size_t v = 0; v + 1 < nodes_.size(); ++v) {
    if (dist_[v] == kInf) continue;
    const double cost = (nodes_[v] - p).norm() + dist_[v];
    if (cost < best_cost && Visible(p, nodes_[v])) {
      best_cost = cost;
      best = static_cast<int>(v);
    }
  }
  if (best < 0) throw InfeasibleError("expert: no path to the goal");
  for (int v = best; v >= 0; v = next_[v]) path.push_back(nodes_[v]);
  return path;
}

double ExpertPlanner::ShortestPathLength(const Eigen::Vector2d& from) const {
  const std::vector<Eigen::Vector2d> path = ShortestPath(from);
  double len = 0.0;
  for (std::size_t i = 1; i < path.size(); ++i) len += (path[i] - path[i - 1]).norm();
  return len;
}

ActionSequence ExpertPlanner::Plan(const Pose& pose,
                                   const ExpertConfig& config) const {
  const std::vector<Eigen::Vector2d> path = ShortestPath(pose.position);
  ActionSequence action(2 * config.n_waypoints);
  std::size_t seg = 1;
  double seg_start = 0.0;  // arc length at path[seg - 1]
  for (int i = 0; i < config.n_waypoints; ++i) {
    const double s = config.spacing * (i + 1);
    while (seg < path.size() &&
           seg_start + (path[seg] - path[seg - 1]).norm() < s) {
      seg_start += (path[seg] - path[seg - 1]).norm();
      ++seg;
    }
    Eigen::Vector2d point = path.back();
    if (seg < path.size()) {
      const double len = (path[seg] - path[seg - 1]).norm();
      const double f = len > 0.0 ? (s - seg_start) / len : 0.0;
      point = path[seg - 1] + f * (path[seg] - path[seg - 1]);
    }
    action.segment<2>(2 * i) = WorldToRobot(pose, point);
  }
  return action;
}

Vector Observation::Features(double range_cap) const {
  Vector f(kObservationDim);
  f.head<2>() = goal / 5.0;
  for (int i = 0; i < 16; ++i) f[2 + i] = ranges[i] / range_cap;
  for (int i = 0; i < kHistoryLength; ++i) f.segment<2>(18 + 2 * i) = history[i] / 0.5;
  return f;
}

Observation Observe(const WorldLayout& world, const Pose& pose,
                    const std::vector<Eigen::Vector2d>& recent,
                    const SensorConfig& config) {
  if (config.n_rays != 16) throw ConfigError("sensor.n_rays must be 16");
  Observation obs;
  obs.goal = WorldToRobot(pose, world.goal);
  for (int k = 0; k < 16; ++k) {
    const double angle = pose.heading + 2.0 * std::numbers::pi * k / 16.0;
    const Eigen::Vector2d dir(std::cos(angle), std::sin(angle));
    double range = config.range_cap;
    for (const Circle& c : world.obstacles) {
      const Eigen::Vector2d f = pose.position - c.center;
      const double b = f.dot(dir);
      const double r = c.radius + config.body_radius;
      const double cc = f.squaredNorm() - r * r;
      if (cc <= 0.0) {
        range = 1e-3;
        break;
      }
      const double disc = b * b - cc;
      if (b >= 0.0 || disc < 0.0) continue;
      range = std::min(range, -b - std::sqrt(disc));
    }
    obs.ranges[k] = std::max(range, 1e-3);
  }
  for (int i = 0; i < kHistoryLength; ++i) {
    const int idx = static_cast<int>(recent.size()) - 1 - i;
    obs.history[i] = idx >= 0 ? WorldToRobot(pose, recent[idx])
                              : Eigen::Vector2d::Zero().eval();
  }
  return obs;
}

NavPolicy ExpertNavPolicy(const ExpertPlanner& planner,
                          const ExpertConfig& config) {
  return [planner, config](const Observation&, const Pose& pose, std::uint64_t) {
    return planner.Plan(pose, config);
  };
}

NavPolicy RandomNavPolicy(int n_waypoints, double scale) {
  return [n_waypoints, scale](const Observation&, const Pose&, std::uint64_t seed) {
    Rng rng(seed);
    return ActionSequence(scale * rng.NormalVector(2 * n_waypoints));
  };
}

void to_json(nlohmann::json& j, const RolloutConfig& c) {
  j = nlohmann::json{{"max_steps", c.max_steps},
                     {"execute", c.execute},
                     {"max_step", c.max_step},
                     {"success_radius", c.success_radius},
                     {"max_collisions", c.max_collisions},
                     {"execution_noise", c.execution_noise},
                     {"robot_radius", c.robot_radius},
                     {"range_cap", c.sensor.range_cap}};
}

void from_json(const nlohmann::json& j, RolloutConfig& c) {
  c.max_steps = GetOr(j, "max_steps", c.max_steps, "rollout");
  c.execute = GetOr(j, "execute", c.execute, "rollout");
  c.max_step = GetOr(j, "max_step", c.max_step, "rollout");
  c.success_radius = GetOr(j, "success_radius", c.success_radius, "rollout");
  c.max_collisions = GetOr(j, "max_collisions", c.max_collisions, "rollout");
  c.execution_noise = GetOr(j, "execution_noise", c.execution_noise, "rollout");
  c.robot_radius = GetOr(j, "robot_radius", c.robot_radius, "rollout");
  c.sensor.range_cap = GetOr(j, "range_cap", c.sensor.range_cap, "rollout");
  c.sensor.body_radius = c.robot_radius;
  if (c.max_steps < 1 || c.execute < 1 || !(c.max_step > 0.0)) {
    throw ConfigError("rollout: max_steps, execute and max_step must be positive");
  }
  if (!(c.sensor.range_cap > 0.0)) throw ConfigError("rollout.range_cap must be positive");
}

EpisodeMetrics Rollout(const NavPolicy& policy, const WorldLayout& world,
                       const RolloutConfig& config, std::uint64_t seed,
                       EpisodeLog* log) {
  EpisodeMetrics m;
  Pose pose = world.start;
  std::vector<Eigen::Vector2d> recent;
  Rng noise(DeriveSeed(seed, 0x6e6f697365ULL));
  if (log != nullptr) *log = EpisodeLog{};
  if (log != nullptr) log->poses.push_back(pose);

  bool finished = (pose.position - world.goal).norm() <= config.success_radius;
  m.success = finished;
  for (std::uint64_t replan = 0; !finished && m.steps_used < config.max_steps;
       ++replan) {
    const Observation obs = Observe(world, pose, recent, config.sensor);
    ActionSequence action = policy(obs, pose, DeriveSeed(seed, replan + 1));
    if (action.size() < 2 * config.execute) {
      throw ShapeError("rollout: policy returned too few waypoints");
    }
    if (!action.allFinite()) action.setZero();
    if (log != nullptr) {
      log->observations.push_back(obs);
      log->replan_poses.push_back(pose);
      log->actions.push_back(action);
    }
    const Pose anchor = pose;
    for (int j = 0; j < config.execute && m.steps_used < config.max_steps; ++j) {
      Eigen::Vector2d target = RobotToWorld(anchor, action.segment<2>(2 * j));
      if (config.execution_noise > 0.0) {
        target += config.execution_noise *
                  Eigen::Vector2d(noise.Normal(), noise.Normal());
      }
      Eigen::Vector2d d = target - pose.position;
      const double len = d.norm();
      if (len > config.max_step) d *= config.max_step / len;
      const Eigen::Vector2d attempted = pose.position + d;
      const double s = FirstContact(world, pose.position, attempted,
                                    config.robot_radius);
      const bool collided = s <= 1.0;
      const Eigen::Vector2d next =
          collided ? Eigen::Vector2d(pose.position + std::max(0.0, s - 1e-6) * d)
                   : attempted;
      const double moved = (next - pose.position).norm();
      if (moved > 1e-12) pose.heading = std::atan2(d.y(), d.x());
      recent.push_back(pose.position);
      pose.position = next;
      m.path_length += moved;
      ++m.steps_used;
      if (collided) ++m.collisions;
      if (log != nullptr) {
        log->poses.push_back(pose);
        log->attempted.push_back(attempted);
        log->collided.push_back(collided);
      }
      if ((pose.position - world.goal).norm() <= config.success_radius) {
        m.success = true;
        finished = true;
        break;
      }
      if (m.collisions >= config.max_collisions) {
        finished = true;
        break;
      }
    }
  }
  m.final_distance = (pose.position - world.goal).norm();
  return m;
}

int RecountCollisions(const WorldLayout& world, const EpisodeLog& log,
                      double robot_radius) {
  int count = 0;
  for (std::size_t i = 0; i < log.attempted.size(); ++i) {
    if (FirstContact(world, log.poses[i].position, log.attempted[i],
                     robot_radius) <= 1.0) {
      ++count;
    }
  }
  return count;
}

NavDataset CollectExpertData(const CollectConfig& config, std::uint64_t seed,
                             int threads) {
  if (config.episodes < 1) throw ConfigError("collect.episodes must be >= 1");
  struct Episode {
    std::vector<Vector> obs;
    std::vector<ActionSequence> actions;
    std::vector<double> steps;
  };
  std::vector<Episode> episodes(static_cast<std::size_t>(config.episodes));
  ParallelFor(episodes.size(), threads, [&](std::size_t e) {
    const WorldLayout world =
        GenerateLayout(DeriveSeed(seed, e), config.difficulty, config.world);
    const ExpertPlanner planner(world, config.world);
    RolloutConfig rollout = config.rollout;
    rollout.execution_noise = config.execution_noise;
    EpisodeLog log;
    Rollout(ExpertNavPolicy(planner, config.expert), world, rollout,
            DeriveSeed(seed, e, 1), &log);
    Episode& out = episodes[e];
    for (std::size_t r = 0; r < log.actions.size(); ++r) {
      out.obs.push_back(log.observations[r].Features(rollout.sensor.range_cap));
      out.actions.push_back(log.actions[r]);
      const double remaining =
          planner.ShortestPathLength(log.replan_poses[r].position);
      out.steps.push_back(std::round(remaining / config.expert.spacing));
    }
  });

  Eigen::Index total = 0;
  for (const Episode& e : episodes) total += static_cast<Eigen::Index>(e.actions.size());
  NavDataset data;
  const int dim = 2 * config.expert.n_waypoints;
  data.observations.resize(kObservationDim, total);
  data.actions.resize(dim, total);
  data.decisions.resize(total);
  data.lengths.resize(total);
  data.steps.resize(total);
  Eigen::Index col = 0;
  for (const Episode& e : episodes) {
    for (std::size_t r = 0; r < e.actions.size(); ++r, ++col) {
      data.observations.col(col) = e.obs[r];
      data.actions.col(col) = e.actions[r];
      const Eigen::Vector2d end = e.actions[r].tail<2>();
      data.decisions[col] = static_cast<int>(ClassifyHeading(HeadingOf(end)));
      data.lengths[col] = end.norm();
      data.steps[col] = e.steps[r];
    }
  }
  return data;
}

}  // namespace ddbm
