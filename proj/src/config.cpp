#include "lof/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace lof {

namespace {

enum class KeyType { kInt, kDouble, kBool, kU64, kEnum };

struct KeySpec {
  const char* name;
  const char* def;
  KeyType type;
  std::vector<std::string> choices;  // kEnum only
  const char* help;
};

const std::vector<KeySpec>& key_specs() {
  static const std::vector<KeySpec> specs = {
      {"seed", "1", KeyType::kU64, {}, "base random seed (LOF_SEED overrides)"},
      {"env.horizon", "40", KeyType::kInt, {}, "steps per trajectory"},
      {"env.dt", "0.5", KeyType::kDouble, {}, "time interval in seconds"},
      {"env.map_size", "30.0", KeyType::kDouble, {}, "square map side in meters"},
      {"target.num", "2", KeyType::kInt, {}, "number of targets"},
      {"target.max_speed", "2.0", KeyType::kDouble, {}, "target speed cap in m/s"},
      {"agent.num", "4", KeyType::kInt, {}, "number of agents"},
      {"agent.max_speed", "2.0", KeyType::kDouble, {}, "agent speed cap in m/s"},
      {"agent.fov_deg", "100.0", KeyType::kDouble, {}, "sensor field of view in degrees"},
      {"agent.max_range", "10.0", KeyType::kDouble, {}, "sensing range in meters"},
      {"agent.policy", "random_waypoint", KeyType::kEnum,
       {"random_waypoint", "pursuit"}, "scripted agent motion policy"},
      {"ss.alpha_deg", "20.0", KeyType::kDouble, {}, "evolution rotation angle in degrees"},
      {"ss.beta_deg", "10.0", KeyType::kDouble, {}, "bearing offset in degrees"},
      {"ss.rho", "1.0", KeyType::kDouble, {}, "observation noise scale"},
      {"ss.sigma_range", "0.2", KeyType::kDouble, {}, "range noise std in meters"},
      {"ss.sigma_bearing", "0.01", KeyType::kDouble, {}, "bearing noise std in radians"},
      {"ss.swap_mismatch", "false", KeyType::kBool, {},
       "rotate the assumed models instead of the truth"},
      {"filter.init_cov", "1.0", KeyType::kDouble, {}, "initial belief covariance scale"},
      {"fusion.temperature", "100.0", KeyType::kDouble, {}, "soft medoid temperature"},
      {"fusion.gamma", "0.001", KeyType::kDouble, {}, "decay factor learning rate"},
      {"fusion.jsd_method", "symmetrized_kl", KeyType::kEnum,
       {"symmetrized_kl", "moment_matched", "monte_carlo"},
       "pairwise divergence used by the fusion distances"},
      {"fusion.jsd_mc_samples", "100000", KeyType::kInt, {},
       "sample count for the monte_carlo divergence"},
      {"metrics.detection_threshold", "0.646", KeyType::kDouble, {},
       "position error bound counted as a detection"},
      {"metrics.mse_components", "position", KeyType::kEnum,
       {"position", "full"}, "state components entering the MSE"},
      {"bci.weight_rule", "inverse_trace", KeyType::kEnum,
       {"inverse_trace", "inverse_det", "uniform"},
       "covariance intersection weight rule"},
      {"sim.disturbance", "none", KeyType::kEnum,
       {"none", "default", "random", "strong"}, "observation disturbance pattern"},
      {"sim.disturbance_onset", "20", KeyType::kInt, {},
       "first disturbed step for the default/strong patterns"},
      {"sim.bias_range", "1.0", KeyType::kDouble, {}, "range bias in meters"},
      {"sim.bias_bearing", "0.1", KeyType::kDouble, {}, "bearing bias in radians"},
      {"sim.random_prob", "0.25", KeyType::kDouble, {},
       "per-agent per-step disturbance probability (random pattern)"},
      {"sim.strong_factor", "2.0", KeyType::kDouble, {},
       "bias multiplier for the strong pattern"},
      {"train.iterations", "500", KeyType::kInt, {}, "training iterations"},
      {"train.batch_size", "16", KeyType::kInt, {}, "trajectories per iteration"},
      {"train.learning_rate", "0.003", KeyType::kDouble, {}, "Adam learning rate"},
      {"train.dataset_size", "1300", KeyType::kInt, {},
       "default trajectory count for dataset generation"},
      {"train.truncation", "step", KeyType::kEnum, {"step", "full"},
       "gradient truncation mode (only 'step' is implemented)"},
  };
  return specs;
}

const KeySpec* find_spec(const std::string& key) {
  for (const auto& s : key_specs()) {
    if (key == s.name) return &s;
  }
  return nullptr;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

RunConfig::RunConfig() {
  for (const auto& s : key_specs()) values_[s.name] = s.def;
}

RunConfig RunConfig::from_string(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) +
                        ": expected key = value");
    cfg.set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  return cfg;
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_string(ss.str());
}

void RunConfig::set(const std::string& key, const std::string& value) {
  const KeySpec* spec = find_spec(key);
  if (!spec) throw ConfigError("unknown config key: " + key);
  // validate by type
  try {
    switch (spec->type) {
      case KeyType::kInt:
        (void)std::stoi(value);
        break;
      case KeyType::kDouble:
        (void)std::stod(value);
        break;
      case KeyType::kU64:
        (void)std::stoull(value);
        break;
      case KeyType::kBool:
        if (value != "true" && value != "false")
          throw ConfigError("expected true/false");
        break;
      case KeyType::kEnum: {
        if (std::find(spec->choices.begin(), spec->choices.end(), value) ==
            spec->choices.end())
          throw ConfigError("not a valid choice");
        break;
      }
    }
  } catch (const ConfigError&) {
    throw ConfigError("invalid value for " + key + ": '" + value + "'");
  } catch (const std::exception&) {
    throw ConfigError("invalid value for " + key + ": '" + value + "'");
  }
  values_[key] = value;
}

const std::string& RunConfig::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key: " + key);
  return it->second;
}

double RunConfig::get_double(const std::string& key) const {
  return std::stod(get(key));
}
int RunConfig::get_int(const std::string& key) const {
  return std::stoi(get(key));
}
bool RunConfig::get_bool(const std::string& key) const {
  return get(key) == "true";
}
std::uint64_t RunConfig::get_u64(const std::string& key) const {
  return std::stoull(get(key));
}

std::string RunConfig::canonical() const {
  std::string out;
  char buf[64];
  for (const auto& [k, v] : values_) {  // std::map keeps keys sorted
    const KeySpec* spec = find_spec(k);
    std::string norm = v;
    if (spec->type == KeyType::kDouble) {
      std::snprintf(buf, sizeof(buf), "%.17g", std::stod(v));
      norm = buf;
    }
    out += k;
    out += '=';
    out += norm;
    out += '\n';
  }
  return out;
}

std::string fnv1a_hex(const std::string& data) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

std::string RunConfig::hash() const { return fnv1a_hex(canonical()); }

JsdSpec RunConfig::jsd() const {
  JsdSpec spec;
  const std::string m = get("fusion.jsd_method");
  if (m == "symmetrized_kl") spec.method = JsdMethod::kSymmetrizedKl;
  if (m == "moment_matched") spec.method = JsdMethod::kMomentMatched;
  if (m == "monte_carlo") spec.method = JsdMethod::kMonteCarlo;
  spec.mc_samples = get_int("fusion.jsd_mc_samples");
  spec.mc_seed = get_u64("seed");
  return spec;
}

WorldConfig RunConfig::world() const {
  WorldConfig w;
  w.map_w = get_double("env.map_size");
  w.map_h = get_double("env.map_size");
  w.horizon = get_int("env.horizon");
  w.dt = get_double("env.dt");
  w.num_agents = get_int("agent.num");
  w.num_targets = get_int("target.num");
  w.target_max_speed = get_double("target.max_speed");
  w.agent_max_speed = get_double("agent.max_speed");
  w.alpha_deg = get_double("ss.alpha_deg");
  w.beta_deg = get_double("ss.beta_deg");
  w.sensor.rho = get_double("ss.rho");
  w.sensor.sigma_r = get_double("ss.sigma_range");
  w.sensor.sigma_b = get_double("ss.sigma_bearing");
  w.sensor.fov_deg = get_double("agent.fov_deg");
  w.sensor.max_range = get_double("agent.max_range");
  w.policy = get("agent.policy") == "pursuit" ? AgentPolicy::kPursuit
                                              : AgentPolicy::kRandomWaypoint;
  w.seed = get_u64("seed");
  w.swap_mismatch = get_bool("ss.swap_mismatch");

  DisturbancePattern d;
  const std::string kind = get("sim.disturbance");
  if (kind == "none") d.kind = DisturbanceKind::kNone;
  if (kind == "default") d.kind = DisturbanceKind::kDefault;
  if (kind == "random") d.kind = DisturbanceKind::kRandom;
  if (kind == "strong") d.kind = DisturbanceKind::kStrong;
  d.onset = get_int("sim.disturbance_onset");
  d.bias_range = get_double("sim.bias_range");
  d.bias_bearing = get_double("sim.bias_bearing");
  d.probability = get_double("sim.random_prob");
  d.strength = get_double("sim.strong_factor");
  if (d.probability < 0.0 || d.probability > 1.0)
    throw ConfigError("sim.random_prob must lie in [0, 1]");
  const bool uses_onset = d.kind == DisturbanceKind::kDefault ||
                          d.kind == DisturbanceKind::kStrong;
  if (uses_onset && d.onset >= w.horizon)
    throw ConfigError("sim.disturbance_onset must fall inside the horizon");
  w.disturbance = d;

  if (w.horizon < 2 || w.num_agents < 1 || w.num_targets < 1)
    throw ConfigError("horizon/agent/target counts out of range");
  return w;
}

EpisodeConfig RunConfig::episode() const {
  EpisodeConfig e;
  e.world = world();
  e.init_cov = get_double("filter.init_cov");
  e.pipeline.temperature = get_double("fusion.temperature");
  e.pipeline.gamma = get_double("fusion.gamma");
  e.pipeline.jsd = jsd();
  e.detection_threshold = get_double("metrics.detection_threshold");
  e.mse_position_only = get("metrics.mse_components") == "position";
  const std::string rule = get("bci.weight_rule");
  if (rule == "inverse_trace") e.bci_rule = BciWeightRule::kInverseTrace;
  if (rule == "inverse_det") e.bci_rule = BciWeightRule::kInverseDet;
  if (rule == "uniform") e.bci_rule = BciWeightRule::kUniform;
  return e;
}

TrainConfig RunConfig::train() const {
  if (get("train.truncation") == "full")
    throw ConfigError(
        "train.truncation=full is an extension point; only 'step' is "
        "implemented");
  TrainConfig t;
  t.iterations = get_int("train.iterations");
  t.batch_size = get_int("train.batch_size");
  t.learning_rate = get_double("train.learning_rate");
  t.seed = get_u64("seed");
  t.init_cov = get_double("filter.init_cov");
  const EpisodeConfig e = episode();
  t.pipeline = e.pipeline;
  t.pipeline.weight_mode = WeightMode::kMlp;
  t.pipeline.fusion_mode = FusionMode::kRobust;
  t.evo = assumed_evolution(e.world);
  t.sensor = assumed_sensor(e.world);
  return t;
}

const std::vector<RunConfig::KeyInfo>& RunConfig::key_infos() {
  static const std::vector<KeyInfo> infos = [] {
    std::vector<KeyInfo> v;
    for (const auto& s : key_specs()) v.push_back({s.name, s.def, s.help});
    return v;
  }();
  return infos;
}

}  // namespace lof
