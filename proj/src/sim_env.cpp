#include "lof/sim_env.hpp"

#include "lof/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace lof {

namespace {

enum StreamRole : std::uint64_t { kMotion = 0, kSensing = 1, kDisturb = 2 };

RngStream substream(std::uint64_t seed, std::uint64_t traj, StreamRole role) {
  return RngStream(derive_seed(derive_seed(seed, traj), role));
}

Eigen::Vector2d clamp_speed(const Eigen::Vector2d& v, double max_speed) {
  const double s = v.norm();
  if (s <= max_speed || s == 0.0) return v;
  return v * (max_speed / s);
}

// Mirror a coordinate into [0, limit], negating the velocity component on
// every wall crossing.
void reflect_axis(double& p, double& v, double limit) {
  while (p < 0.0 || p > limit) {
    if (p < 0.0) {
      p = -p;
      v = -v;
    } else {
      p = 2.0 * limit - p;
      v = -v;
    }
  }
}

}  // namespace

EvolutionModel truth_evolution(const WorldConfig& cfg) {
  return EvolutionModel::make(cfg.swap_mismatch ? 0.0 : cfg.alpha_deg, cfg.dt);
}

SensorModel truth_sensor(const WorldConfig& cfg) {
  SensorModel s = cfg.sensor;
  s.beta_deg = cfg.swap_mismatch ? 0.0 : cfg.beta_deg;
  return s;
}

EvolutionModel assumed_evolution(const WorldConfig& cfg) {
  return EvolutionModel::make(cfg.swap_mismatch ? cfg.alpha_deg : 0.0, cfg.dt);
}

SensorModel assumed_sensor(const WorldConfig& cfg) {
  SensorModel s = cfg.sensor;
  s.beta_deg = cfg.swap_mismatch ? cfg.beta_deg : 0.0;
  return s;
}

World init_world(const WorldConfig& cfg, std::uint64_t trajectory_index) {
  World w(cfg, substream(cfg.seed, trajectory_index, kMotion),
          substream(cfg.seed, trajectory_index, kSensing),
          substream(cfg.seed, trajectory_index, kDisturb));

  w.targets.reserve(cfg.num_targets);
  for (int j = 0; j < cfg.num_targets; ++j) {
    StateVec x;
    x(0) = w.motion_rng.uniform(0.0, cfg.map_w);
    x(1) = w.motion_rng.uniform(0.0, cfg.map_h);
    Eigen::Vector2d v(w.motion_rng.uniform(-cfg.target_max_speed,
                                           cfg.target_max_speed),
                      w.motion_rng.uniform(-cfg.target_max_speed,
                                           cfg.target_max_speed));
    v = clamp_speed(v, cfg.target_max_speed);
    x(2) = v(0);
    x(3) = v(1);
    w.targets.push_back(x);
  }

  w.agents.reserve(cfg.num_agents);
  w.waypoints.reserve(cfg.num_agents);
  for (int i = 0; i < cfg.num_agents; ++i) {
    AgentPose p;
    p.position = {w.motion_rng.uniform(0.0, cfg.map_w),
                  w.motion_rng.uniform(0.0, cfg.map_h)};
    p.heading = wrap_angle(w.motion_rng.uniform(-kPi, kPi));
    w.agents.push_back(p);
    w.waypoints.emplace_back(w.motion_rng.uniform(0.0, cfg.map_w),
                             w.motion_rng.uniform(0.0, cfg.map_h));
  }

  w.faulty_agent = w.disturbance_rng.uniform_int(0, cfg.num_agents - 1);
  return w;
}

void step_world(World& world, const std::vector<Eigen::Vector2d>& goals) {
  const WorldConfig& cfg = world.cfg;
  const EvolutionModel evo = truth_evolution(cfg);

  for (auto& x : world.targets) {
    x = step_truth(x, evo, world.motion_rng);
    Eigen::Vector2d v = clamp_speed({x(2), x(3)}, cfg.target_max_speed);
    x(2) = v(0);
    x(3) = v(1);
    reflect_axis(x(0), x(2), cfg.map_w);
    reflect_axis(x(1), x(3), cfg.map_h);
  }

  const double step_len = cfg.agent_max_speed * cfg.dt;
  for (int i = 0; i < cfg.num_agents; ++i) {
    AgentPose& a = world.agents[i];
    Eigen::Vector2d goal;
    if (cfg.policy == AgentPolicy::kPursuit && !goals.empty()) {
      // round-robin target assignment keeps every chase point covered
      goal = goals[i % goals.size()];
    } else {
      // random waypoint, redrawn on arrival
      if ((world.waypoints[i] - a.position).norm() <= step_len) {
        world.waypoints[i] = {world.motion_rng.uniform(0.0, cfg.map_w),
                              world.motion_rng.uniform(0.0, cfg.map_h)};
      }
      goal = world.waypoints[i];
    }
    const Eigen::Vector2d delta = goal - a.position;
    const double dist = delta.norm();
    if (dist > 1e-12) {
      const Eigen::Vector2d move =
          dist <= step_len ? delta : (delta * (step_len / dist)).eval();
      a.position += move;
      a.position(0) = std::clamp(a.position(0), 0.0, cfg.map_w);
      a.position(1) = std::clamp(a.position(1), 0.0, cfg.map_h);
      a.heading = std::atan2(move(1), move(0));
    }
  }
  ++world.t;
}

Observation inject_disturbance(const Observation& obs,
                               const DisturbancePattern& pattern, int agent,
                               int faulty_agent, int t, RngStream& rng) {
  if (!obs.has_value()) return obs;
  double br = 0.0;
  double bb = 0.0;
  switch (pattern.kind) {
    case DisturbanceKind::kNone:
      return obs;
    case DisturbanceKind::kDefault:
      if (agent == faulty_agent && t >= pattern.onset) {
        br = pattern.bias_range;
        bb = pattern.bias_bearing;
      }
      break;
    case DisturbanceKind::kRandom:
      if (rng.uniform() < pattern.probability) {
        br = pattern.bias_range;
        bb = pattern.bias_bearing;
      }
      break;
    case DisturbanceKind::kStrong:
      if (agent == faulty_agent && t >= pattern.onset) {
        br = pattern.strength * pattern.bias_range;
        bb = pattern.strength * pattern.bias_bearing;
      }
      break;
  }
  if (br == 0.0 && bb == 0.0) return obs;
  RangeBearing rb = *obs;
  rb.range += br;
  rb.bearing = wrap_angle(rb.bearing + bb);
  return rb;
}

std::vector<std::vector<Observation>> observe_all(World& world) {
  const WorldConfig& cfg = world.cfg;
  const SensorModel sensor = truth_sensor(cfg);
  const int t = world.t + 1;  // steps are 1-based
  std::vector<std::vector<Observation>> obs(cfg.num_agents);
  for (int i = 0; i < cfg.num_agents; ++i) {
    obs[i].resize(cfg.num_targets);
    for (int j = 0; j < cfg.num_targets; ++j) {
      Observation o =
          observe(world.agents[i], world.targets[j], sensor, world.sensing_rng);
      obs[i][j] = inject_disturbance(o, cfg.disturbance, i, world.faulty_agent,
                                     t, world.disturbance_rng);
    }
  }
  return obs;
}

Trajectory simulate_trajectory(const WorldConfig& cfg,
                               std::uint64_t trajectory_index) {
  World world = init_world(cfg, trajectory_index);
  const bool pursuit = cfg.policy == AgentPolicy::kPursuit;

  // Pursuit needs chase points. A likelihood-weighted fusion chain stands in
  // for whatever tracker the downstream application would run.
  const EvolutionModel evo = assumed_evolution(cfg);
  const SensorModel sensor = assumed_sensor(cfg);
  PipelineOptions opts;
  opts.weight_mode = WeightMode::kExactLikelihood;
  opts.fusion_mode = FusionMode::kRobust;
  std::vector<TargetChain> chains;
  if (pursuit) {
    for (int j = 0; j < cfg.num_targets; ++j) {
      chains.push_back(TargetChain::init(
          GaussianBelief::isotropic(Eigen::VectorXd(world.targets[j]), 1.0),
          cfg.num_agents));
    }
  }

  Trajectory traj;
  traj.steps.reserve(cfg.horizon);
  std::vector<Eigen::Vector2d> goals;
  for (int t = 1; t <= cfg.horizon; ++t) {
    if (t > 1) step_world(world, goals);
    TrajectoryStep step;
    step.targets = world.targets;
    step.agents = world.agents;
    step.obs = observe_all(world);
    step.disturbed.assign(cfg.num_agents, false);
    if (pursuit) {
      goals.clear();
      for (int j = 0; j < cfg.num_targets; ++j) {
        std::vector<AgentSample> samples(cfg.num_agents);
        for (int i = 0; i < cfg.num_agents; ++i) {
          samples[i].pose = step.agents[i];
          samples[i].obs = step.obs[i][j];
        }
        const PipelineStepRecord rec = pipeline_step(
            chains[j], samples, evo, sensor, opts, nullptr, nullptr, nullptr);
        goals.emplace_back(rec.fusion.fused.mean.head(2));
      }
    }
    traj.steps.push_back(std::move(step));
  }
  return traj;
}

// ---------------------------------------------------------------------------
// Dataset io
//
// One header block, then one line per (trajectory, step):
//   traj,t,<per-target x1,x2,v1,v2>,<per-agent a1,a2,ath>,<per obs r,phi|NA>
// Missing observations are a single NA field.

namespace {

void append_num(std::string& line, double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  line += buf;
}

}  // namespace

void generate_dataset(const WorldConfig& cfg, int n_trajectories,
                      const std::string& path, const std::string& config_hash) {
  if (n_trajectories < 1) throw ConfigError("dataset needs at least one trajectory");
  std::ofstream out(path);
  if (!out) throw IoError("cannot open dataset for writing: " + path);

  out << "# lof dataset v1 agents=" << cfg.num_agents
      << " targets=" << cfg.num_targets << " horizon=" << cfg.horizon
      << " policy="
      << (cfg.policy == AgentPolicy::kPursuit ? "pursuit" : "random_waypoint")
      << " seed=" << cfg.seed << " config_hash=" << config_hash << "\n";
  out << "traj,t";
  for (int j = 0; j < cfg.num_targets; ++j)
    out << ",tgt" << j << ".x1,tgt" << j << ".x2,tgt" << j << ".v1,tgt" << j
        << ".v2";
  for (int i = 0; i < cfg.num_agents; ++i)
    out << ",ag" << i << ".a1,ag" << i << ".a2,ag" << i << ".ath";
  for (int i = 0; i < cfg.num_agents; ++i)
    for (int j = 0; j < cfg.num_targets; ++j)
      out << ",obs" << i << "_" << j << ".r,obs" << i << "_" << j << ".phi";
  out << "\n";

  for (int n = 0; n < n_trajectories; ++n) {
    const Trajectory traj = simulate_trajectory(cfg, static_cast<std::uint64_t>(n));
    for (int t = 0; t < static_cast<int>(traj.steps.size()); ++t) {
      const TrajectoryStep& s = traj.steps[t];
      std::string line = std::to_string(n) + "," + std::to_string(t + 1);
      for (const auto& x : s.targets) {
        for (int k = 0; k < 4; ++k) {
          line += ',';
          append_num(line, x(k));
        }
      }
      for (const auto& a : s.agents) {
        line += ',';
        append_num(line, a.position(0));
        line += ',';
        append_num(line, a.position(1));
        line += ',';
        append_num(line, a.heading);
      }
      for (const auto& per_agent : s.obs) {
        for (const auto& o : per_agent) {
          if (o.has_value()) {
            line += ',';
            append_num(line, o->range);
            line += ',';
            append_num(line, o->bearing);
          } else {
            line += ",NA";
          }
        }
      }
      out << line << "\n";
    }
  }
  if (!out.good()) throw IoError("failed writing dataset: " + path);
}

Dataset read_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset: " + path);
  Dataset ds;
  int num_agents = 0;
  int num_targets = 0;

  std::string line;
  if (!std::getline(in, line) || line.rfind("# lof dataset", 0) != 0)
    throw IoError("missing dataset header in " + path);
  {
    std::istringstream ss(line);
    std::string tok;
    while (ss >> tok) {
      if (tok.rfind("agents=", 0) == 0) num_agents = std::stoi(tok.substr(7));
      if (tok.rfind("targets=", 0) == 0) num_targets = std::stoi(tok.substr(8));
      if (tok.rfind("config_hash=", 0) == 0) ds.config_hash = tok.substr(12);
    }
  }
  if (num_agents < 1 || num_targets < 1)
    throw IoError("dataset header lacks agent/target counts in " + path);
  std::getline(in, line);  // column header

  int current_traj = -1;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) fields.push_back(field);

    size_t k = 0;
    const auto next = [&]() -> const std::string& {
      if (k >= fields.size()) throw IoError("truncated dataset line in " + path);
      return fields[k++];
    };
    const int traj_id = std::stoi(next());
    next();  // step index, implied by order
    if (traj_id != current_traj) {
      ds.trajectories.emplace_back();
      current_traj = traj_id;
    }
    TrajectoryStep step;
    step.targets.resize(num_targets);
    for (int j = 0; j < num_targets; ++j)
      for (int c = 0; c < 4; ++c) step.targets[j](c) = std::stod(next());
    step.agents.resize(num_agents);
    for (int i = 0; i < num_agents; ++i) {
      step.agents[i].position(0) = std::stod(next());
      step.agents[i].position(1) = std::stod(next());
      step.agents[i].heading = std::stod(next());
    }
    step.obs.assign(num_agents, std::vector<Observation>(num_targets));
    for (int i = 0; i < num_agents; ++i) {
      for (int j = 0; j < num_targets; ++j) {
        const std::string& first = next();
        if (first == "NA") {
          step.obs[i][j] = std::nullopt;
        } else {
          RangeBearing rb;
          rb.range = std::stod(first);
          rb.bearing = std::stod(next());
          step.obs[i][j] = rb;
        }
      }
    }
    step.disturbed.assign(num_agents, false);
    ds.trajectories.back().steps.push_back(std::move(step));
  }
  return ds;
}

}  // namespace lof
