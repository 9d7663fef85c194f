// Copyright 2026 The ddbm Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef DDBM_NAVSIM_H_
#define DDBM_NAVSIM_H_

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include "ddbm/types.h"

namespace ddbm {

// World frame is metric with the origin at the arena centre. The robot frame
// has y pointing forward and x pointing to the robot's left.

struct Circle {
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  double radius = 0.0;
};

struct Pose {
  Eigen::Vector2d position = Eigen::Vector2d::Zero();
  double heading = 0.0;  // world angle of the forward axis
};

enum class Difficulty { kOpen, kCluttered };

Difficulty ParseDifficulty(const std::string& name);
std::string ToString(Difficulty d);

struct WorldConfig {
  double half_extent = 5.0;
  int min_obstacles = 6;
  int max_obstacles = 12;
  double min_radius = 0.3;
  double max_radius = 0.8;
  double robot_radius = 0.2;
  double margin = 0.3;      // extra inflation used by the planner
  int polygon_sides = 16;   // circumscribed polygon per inflated obstacle
  double min_start_goal = 6.0;
};

void to_json(nlohmann::json& j, const WorldConfig& c);
void from_json(const nlohmann::json& j, WorldConfig& c);

struct WorldLayout {
  double half_extent = 5.0;  // bounds are [-h, h]^2
  std::vector<Circle> obstacles;
  Pose start;
  Eigen::Vector2d goal = Eigen::Vector2d::Zero();
  std::uint64_t seed = 0;
};

void to_json(nlohmann::json& j, const WorldLayout& w);
void from_json(const nlohmann::json& j, WorldLayout& w);

// Deterministic per (seed, difficulty). Cluttered layouts are regenerated up
// to 100 times until the planner finds a path; throws InfeasibleError after.
WorldLayout GenerateLayout(std::uint64_t seed, Difficulty difficulty,
                           const WorldConfig& config = {});

// Frame helpers.
Eigen::Vector2d WorldToRobot(const Pose& pose, const Eigen::Vector2d& world);
Eigen::Vector2d RobotToWorld(const Pose& pose, const Eigen::Vector2d& local);

// Distance from p to the closest obstacle boundary, negative inside.
double Clearance(const WorldLayout& world, const Eigen::Vector2d& p);

// Smallest s in [0, 1] at which the segment a->b comes within `inflate` of an
// obstacle boundary, or a value > 1 when it never does.
double FirstContact(const WorldLayout& world, const Eigen::Vector2d& a,
                    const Eigen::Vector2d& b, double inflate);

struct ExpertConfig {
  int n_waypoints = 8;
  double spacing = 0.25;
};

void to_json(nlohmann::json& j, const ExpertConfig& c);
void from_json(const nlohmann::json& j, ExpertConfig& c);

// Shortest paths on the visibility graph of the inflated obstacles
// (approximated by circumscribed polygons), with Dijkstra from the goal.
class ExpertPlanner {
 public:
  ExpertPlanner(const WorldLayout& world, const WorldConfig& config = {});

  // Polyline from `from` to the goal. A start inside an inflated obstacle
  // first steps radially out of it. Throws InfeasibleError without a path.
  std::vector<Eigen::Vector2d> ShortestPath(const Eigen::Vector2d& from) const;
  double ShortestPathLength(const Eigen::Vector2d& from) const;

  // n_waypoints points at arc lengths spacing * (1..n) along the path,
  // clamped at the goal, in the robot frame.
  ActionSequence Plan(const Pose& pose, const ExpertConfig& config = {}) const;

  const std::vector<Eigen::Vector2d>& nodes() const { return nodes_; }

 private:
  bool Visible(const Eigen::Vector2d& a, const Eigen::Vector2d& b) const;
  Eigen::Vector2d Escape(const Eigen::Vector2d& p) const;

  const WorldLayout* world_;
  std::vector<double> inflated_;
  std::vector<Eigen::Vector2d> nodes_;  // polygon vertices; goal is last
  std::vector<double> dist_;            // to goal
  std::vector<int> next_;               // towards goal, -1 at the goal
};

// Each ray reports how far a disc of body_radius can travel along it before
// touching an obstacle, i.e. a thin ray against obstacles grown by the body.
struct SensorConfig {
  int n_rays = 16;
  double range_cap = 4.0;
  double body_radius = 0.2;
};

inline constexpr int kHistoryLength = 3;
inline constexpr int kObservationDim = 2 + 16 + 2 * kHistoryLength;

struct Observation {
  Eigen::Vector2d goal = Eigen::Vector2d::Zero();  // robot frame, meters
  std::array<double, 16> ranges{};                  // meters, in (0, cap]
  // Positions of the previous control steps in the current robot frame,
  // most recent first; padded with zeros at the episode start.
  std::array<Eigen::Vector2d, kHistoryLength> history{};

  // Normalized flat features (goal / 5, ranges / cap, history / 0.5).
  Vector Features(double range_cap = 4.0) const;
};

// `recent` holds earlier world positions, oldest first.
Observation Observe(const WorldLayout& world, const Pose& pose,
                    const std::vector<Eigen::Vector2d>& recent,
                    const SensorConfig& config = {});

// Maps the current observation to waypoints in the robot frame (meters).
// The pose is provided for privileged policies such as the expert; learned
// policies ignore it.
using NavPolicy = std::function<ActionSequence(
    const Observation& obs, const Pose& pose, std::uint64_t seed)>;

// Copies the planner; the world it was built on must outlive the policy.
NavPolicy ExpertNavPolicy(const ExpertPlanner& planner,
                          const ExpertConfig& config = {});
// Waypoints with coordinates drawn independently from N(0, scale^2).
NavPolicy RandomNavPolicy(int n_waypoints, double scale);

struct RolloutConfig {
  int max_steps = 200;     // control steps
  int execute = 2;         // waypoints executed per replan
  double max_step = 0.5;   // meters per control step
  double success_radius = 0.3;
  int max_collisions = 5;
  // Std of Gaussian noise added to each executed target (data collection).
  double execution_noise = 0.0;
  double robot_radius = 0.2;
  SensorConfig sensor;
};

void to_json(nlohmann::json& j, const RolloutConfig& c);
void from_json(const nlohmann::json& j, RolloutConfig& c);

struct EpisodeMetrics {
  bool success = false;
  int collisions = 0;
  double path_length = 0.0;
  int steps_used = 0;
  double final_distance = 0.0;
};

struct EpisodeLog {
  std::vector<Pose> poses;                  // after each control step, start first
  std::vector<Eigen::Vector2d> attempted;   // commanded end of each step
  std::vector<bool> collided;
  std::vector<Observation> observations;    // one per replan
  std::vector<Pose> replan_poses;
  std::vector<ActionSequence> actions;      // policy output per replan
};

// Receding-horizon execution: each replan runs the first `execute` waypoints
// as one control step each. A step that would penetrate an obstacle stops at
// contact and counts as a collision.
EpisodeMetrics Rollout(const NavPolicy& policy, const WorldLayout& world,
                       const RolloutConfig& config, std::uint64_t seed,
                       EpisodeLog* log = nullptr);

// Collision count recomputed from a log's attempted moves.
int RecountCollisions(const WorldLayout& world, const EpisodeLog& log,
                      double robot_radius);

// Expert demonstrations: one sample per replan of noisy expert rollouts.
struct NavDataset {
  Matrix observations;       // kObservationDim x N (normalized features)
  Matrix actions;            // 2 n_waypoints x N, meters
  Eigen::VectorXi decisions; // heading class of the final waypoint
  Vector lengths;            // distance to the final waypoint, meters
  Vector steps;              // remaining expert steps to the goal
  Eigen::Index size() const { return actions.cols(); }
};

struct CollectConfig {
  int episodes = 2000;
  double execution_noise = 0.15;
  Difficulty difficulty = Difficulty::kCluttered;
  WorldConfig world;
  ExpertConfig expert;
  RolloutConfig rollout;
};

NavDataset CollectExpertData(const CollectConfig& config, std::uint64_t seed,
                             int threads = 1);

}  // namespace ddbm

#endif  // DDBM_NAVSIM_H_
