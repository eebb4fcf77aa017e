#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "lof/rng.hpp"
#include "lof/state_space.hpp"

namespace lof {

enum class AgentPolicy { kRandomWaypoint, kPursuit };

enum class DisturbanceKind { kNone, kDefault, kRandom, kStrong };

struct DisturbancePattern {
  DisturbanceKind kind = DisturbanceKind::kNone;
  int onset = 20;            // step index at which the default pattern starts
  double bias_range = 1.0;   // meters
  double bias_bearing = 0.1; // radians
  double probability = 0.25; // per agent per step, random pattern
  double strength = 2.0;     // multiplier for the strong pattern
};

struct WorldConfig {
  double map_w = 30.0;
  double map_h = 30.0;
  int horizon = 40;
  double dt = 0.5;
  int num_agents = 4;
  int num_targets = 2;
  double target_max_speed = 2.0;
  double agent_max_speed = 2.0;
  double alpha_deg = 20.0;  // truth evolution rotation
  double beta_deg = 10.0;   // truth sensor bearing offset
  SensorModel sensor;       // beta applied on top of this
  AgentPolicy policy = AgentPolicy::kRandomWaypoint;
  DisturbancePattern disturbance;
  std::uint64_t seed = 1;
  /// When set, truth uses the nominal models and the estimators are handed
  /// the rotated ones instead.
  bool swap_mismatch = false;
};

/// Truth-side models actually used to generate data.
EvolutionModel truth_evolution(const WorldConfig& cfg);
SensorModel truth_sensor(const WorldConfig& cfg);
/// Models handed to every estimator.
EvolutionModel assumed_evolution(const WorldConfig& cfg);
SensorModel assumed_sensor(const WorldConfig& cfg);

struct World {
  WorldConfig cfg;
  int t = 0;  // completed steps
  std::vector<StateVec> targets;
  std::vector<AgentPose> agents;
  std::vector<Eigen::Vector2d> waypoints;
  int faulty_agent = 0;
  RngStream motion_rng;
  RngStream sensing_rng;
  RngStream disturbance_rng;

  World(const WorldConfig& c, RngStream m, RngStream s, RngStream d)
      : cfg(c), motion_rng(m), sensing_rng(s), disturbance_rng(d) {}
};

/// Places targets and agents uniformly in the map; deterministic given the
/// seed. Substreams are derived from (cfg.seed, trajectory_index).
World init_world(const WorldConfig& cfg, std::uint64_t trajectory_index = 0);

/// Advances every target (dynamics, speed clamp, boundary reflection) and
/// every agent under the configured policy. Pursuit goals are required for
/// the pursuit policy: one chase point per target.
void step_world(World& world,
                const std::vector<Eigen::Vector2d>& pursuit_goals = {});

/// Applies the configured bias to a non-missing observation. Empty samples
/// pass through unchanged.
Observation inject_disturbance(const Observation& obs,
                               const DisturbancePattern& pattern, int agent,
                               int faulty_agent, int t, RngStream& rng);

/// Observes every target with every agent, disturbance included.
/// obs[i][j] is agent i's sample of target j.
std::vector<std::vector<Observation>> observe_all(World& world);

struct TrajectoryStep {
  std::vector<StateVec> targets;
  std::vector<AgentPose> agents;
  std::vector<std::vector<Observation>> obs;
  std::vector<bool> disturbed;  // per agent
};

struct Trajectory {
  std::vector<TrajectoryStep> steps;
};

/// Simulates one full trajectory of cfg.horizon steps.
Trajectory simulate_trajectory(const WorldConfig& cfg,
                               std::uint64_t trajectory_index);

/// Writes n independent trajectories to a line-oriented text file.
void generate_dataset(const WorldConfig& cfg, int n_trajectories,
                      const std::string& path, const std::string& config_hash);

struct Dataset {
  std::vector<Trajectory> trajectories;
  std::string config_hash;
};

Dataset read_dataset(const std::string& path);

}  // namespace lof
