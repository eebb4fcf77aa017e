#include "lof/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <thread>

namespace lof {

double mse_db(double mse) {
  if (mse <= 0.0) throw NonPositive("mse must be positive for the dB scale");
  return 10.0 * std::log10(mse);
}

double fusion_gain(const Eigen::VectorXd& local_mses, double fused_mse) {
  const double total = local_mses.sum();
  if (total <= 0.0)
    throw DegenerateDenominator("local errors sum to zero");
  const double m = static_cast<double>(local_mses.size());
  return (total - fused_mse * m) / total * 100.0;
}

double mnll(const std::vector<Eigen::VectorXd>& truths,
            const std::vector<GaussianBelief>& beliefs) {
  if (truths.size() != beliefs.size() || truths.empty())
    throw DimensionError("mnll needs matching, non-empty sequences");
  double acc = 0.0;
  for (size_t t = 0; t < truths.size(); ++t)
    acc -= log_pdf(truths[t], beliefs[t]);
  return acc / static_cast<double>(truths.size());
}

double detection_ratio(const std::vector<Eigen::VectorXd>& truths,
                       const std::vector<Eigen::VectorXd>& fused_means,
                       double threshold) {
  if (threshold <= 0.0) throw NonPositive("detection threshold must be positive");
  if (truths.size() != fused_means.size() || truths.empty())
    throw DimensionError("detection_ratio needs matching sequences");
  int hits = 0;
  for (size_t t = 0; t < truths.size(); ++t) {
    const double err = (truths[t].head(2) - fused_means[t].head(2)).norm();
    if (err <= threshold) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(truths.size());
}

Method parse_method(const std::string& name) {
  if (name == "lof") return Method::kLof;
  if (name == "lof_tm") return Method::kLofTm;
  if (name == "lof_m") return Method::kLofM;
  if (name == "bci") return Method::kBci;
  if (name == "skf") return Method::kSkf;
  throw ConfigError("unknown method name: " + name);
}

std::string method_name(Method m) {
  switch (m) {
    case Method::kLof: return "lof";
    case Method::kLofTm: return "lof_tm";
    case Method::kLofM: return "lof_m";
    case Method::kBci: return "bci";
    case Method::kSkf: return "skf";
  }
  return "?";
}

namespace {

double squared_error(const Eigen::VectorXd& truth, const Eigen::VectorXd& mean,
                     bool position_only) {
  if (position_only) return (truth.head(2) - mean.head(2)).squaredNorm();
  return (truth - mean).squaredNorm();
}

PipelineOptions options_for(const EpisodeConfig& cfg, Method method,
                            const MlpParams* mlp) {
  PipelineOptions o = cfg.pipeline;
  switch (method) {
    case Method::kLof:
      o.weight_mode = mlp ? WeightMode::kMlp : WeightMode::kExactLikelihood;
      o.fusion_mode = FusionMode::kRobust;
      break;
    case Method::kLofTm:
      o.weight_mode = WeightMode::kExactLikelihood;
      o.fusion_mode = FusionMode::kPlainMixture;
      break;
    case Method::kLofM:
      o.weight_mode = WeightMode::kUniform;
      o.fusion_mode = FusionMode::kPlainMixture;
      break;
    default:
      break;
  }
  return o;
}

}  // namespace

EpisodeResult run_episode(const EpisodeConfig& cfg, Method method,
                          const MlpParams* mlp, std::uint64_t seed) {
  WorldConfig wc = cfg.world;
  wc.seed = seed;
  World world = init_world(wc);
  const EvolutionModel evo = assumed_evolution(wc);
  const SensorModel sensor = assumed_sensor(wc);
  const PipelineOptions opts = options_for(cfg, method, mlp);
  const int num_agents = wc.num_agents;
  const int num_targets = wc.num_targets;

  // fusion-method state
  std::vector<TargetChain> chains;              // lof variants
  std::vector<GaussianBelief> skf_beliefs;      // skf
  // per (agent, target) chains: the no-fusion reference for every method
  // and the local stage of bci
  std::vector<std::vector<GaussianBelief>> solo(num_agents);

  for (int j = 0; j < num_targets; ++j) {
    const GaussianBelief init = GaussianBelief::isotropic(
        Eigen::VectorXd(world.targets[j]), cfg.init_cov);
    chains.push_back(TargetChain::init(init, num_agents));
    skf_beliefs.push_back(init);
  }
  for (int i = 0; i < num_agents; ++i) {
    for (int j = 0; j < num_targets; ++j) {
      solo[i].push_back(GaussianBelief::isotropic(
          Eigen::VectorXd(world.targets[j]), cfg.init_cov));
    }
  }

  EpisodeResult res;
  res.local_mse = Eigen::VectorXd::Zero(num_agents);
  double fused_acc = 0.0;
  Eigen::VectorXd solo_acc = Eigen::VectorXd::Zero(num_agents);
  std::vector<Eigen::VectorXd> flat_truths;
  std::vector<GaussianBelief> flat_fused;

  std::vector<Eigen::Vector2d> pursuit_goals;
  for (int t = 1; t <= wc.horizon; ++t) {
    const bool first = t == 1;
    if (!first) step_world(world, pursuit_goals);
    const auto obs = observe_all(world);

    std::vector<GaussianBelief> step_fused(num_targets);
    for (int j = 0; j < num_targets; ++j) {
      std::vector<AgentSample> samples(num_agents);
      for (int i = 0; i < num_agents; ++i) {
        samples[i].pose = world.agents[i];
        samples[i].obs = obs[i][j];
      }

      // no-fusion reference chains
      for (int i = 0; i < num_agents; ++i) {
        const LocalEstimate est = estimate_step(
            solo[i][j], samples[i].obs, samples[i].pose, evo, sensor, first);
        solo[i][j] = est.belief;
        solo_acc(i) += squared_error(world.targets[j], est.belief.mean,
                                     cfg.mse_position_only);
      }

      switch (method) {
        case Method::kLof:
        case Method::kLofTm:
        case Method::kLofM: {
          const PipelineStepRecord rec = pipeline_step(
              chains[j], samples, evo, sensor, opts, mlp, nullptr, nullptr);
          step_fused[j] = rec.fusion.fused;
          break;
        }
        case Method::kBci: {
          std::vector<GaussianBelief> locals;
          locals.reserve(num_agents);
          for (int i = 0; i < num_agents; ++i) locals.push_back(solo[i][j]);
          step_fused[j] = bci_fuse(locals, cfg.bci_rule);
          break;
        }
        case Method::kSkf: {
          std::vector<std::pair<AgentPose, Observation>> pairs;
          pairs.reserve(num_agents);
          for (int i = 0; i < num_agents; ++i)
            pairs.emplace_back(samples[i].pose, samples[i].obs);
          skf_beliefs[j] = skf_fuse(skf_beliefs[j], pairs, evo, sensor, first);
          step_fused[j] = skf_beliefs[j];
          break;
        }
      }

      const Eigen::VectorXd truth = world.targets[j];
      fused_acc += squared_error(truth, step_fused[j].mean,
                                 cfg.mse_position_only);
      res.step_nll.push_back(-log_pdf(truth, step_fused[j]));
      const double pos_err =
          (truth.head(2) - step_fused[j].mean.head(2)).norm();
      res.detection_flags.push_back(pos_err <= cfg.detection_threshold);
      flat_truths.push_back(truth);
      flat_fused.push_back(step_fused[j]);
    }

    pursuit_goals.clear();
    for (int j = 0; j < num_targets; ++j)
      pursuit_goals.emplace_back(step_fused[j].mean.head(2));

    res.fused.push_back(step_fused);
    std::vector<Eigen::VectorXd> ts;
    for (int j = 0; j < num_targets; ++j)
      ts.push_back(Eigen::VectorXd(world.targets[j]));
    res.truths.push_back(std::move(ts));
  }

  const double samples_n = static_cast<double>(wc.horizon * num_targets);
  res.fused_mse = fused_acc / samples_n;
  res.local_mse = solo_acc / samples_n;
  res.mnll_value = mnll(flat_truths, flat_fused);
  int hits = 0;
  for (const bool f : res.detection_flags) hits += f ? 1 : 0;
  res.detection = static_cast<double>(hits) / samples_n;
  return res;
}

namespace {

MetricStats stats_of(const std::vector<double>& xs) {
  MetricStats s;
  const double n = static_cast<double>(xs.size());
  for (const double x : xs) s.mean += x;
  s.mean /= n;
  double var = 0.0;
  for (const double x : xs) var += (x - s.mean) * (x - s.mean);
  s.stddev = xs.size() > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;
  return s;
}

}  // namespace

std::vector<MethodMetrics> evaluate(const EpisodeConfig& cfg,
                                    const std::vector<Method>& methods,
                                    int n_episodes, std::uint64_t seed,
                                    const MlpParams* mlp, int threads) {
  if (n_episodes < 1) throw ConfigError("need at least one episode");
  std::vector<MethodMetrics> table;
  for (const Method method : methods) {
    if (method == Method::kLof && mlp == nullptr)
      throw ConfigError("method lof requires a checkpoint");
    std::vector<double> dbs(n_episodes), fgs(n_episodes), nlls(n_episodes),
        dets(n_episodes);
    const auto run_range = [&](int lo, int hi) {
      for (int e = lo; e < hi; ++e) {
        const EpisodeResult r =
            run_episode(cfg, method, mlp, derive_seed(seed, e));
        dbs[e] = mse_db(r.fused_mse);
        fgs[e] = fusion_gain(r.local_mse, r.fused_mse);
        nlls[e] = r.mnll_value;
        dets[e] = r.detection;
      }
    };
    const int k = std::max(1, std::min(threads, n_episodes));
    if (k == 1) {
      run_range(0, n_episodes);
    } else {
      std::vector<std::thread> pool;
      const int chunk = (n_episodes + k - 1) / k;
      for (int w = 0; w < k; ++w) {
        const int lo = w * chunk;
        const int hi = std::min(n_episodes, lo + chunk);
        if (lo < hi) pool.emplace_back(run_range, lo, hi);
      }
      for (auto& th : pool) th.join();
    }

    MethodMetrics row;
    row.method = method;
    row.mse_db_stats = stats_of(dbs);
    row.fg_stats = stats_of(fgs);
    row.mnll_stats = stats_of(nlls);
    row.detection_stats = stats_of(dets);
    row.episodes = n_episodes;
    table.push_back(row);
  }
  return table;
}

void write_results_csv(const std::string& path,
                       const std::vector<MethodMetrics>& rows,
                       const std::string& config_hash) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open results file for writing: " + path);
  out << "method,metric,mean,std,n,config_hash\n";
  char buf[160];
  const auto emit = [&](const std::string& method, const char* metric,
                        const MetricStats& s, int n) {
    std::snprintf(buf, sizeof(buf), "%s,%s,%.17g,%.17g,%d,%s\n",
                  method.c_str(), metric, s.mean, s.stddev, n,
                  config_hash.c_str());
    out << buf;
  };
  for (const auto& r : rows) {
    const std::string m = method_name(r.method);
    emit(m, "mse_db", r.mse_db_stats, r.episodes);
    emit(m, "fg", r.fg_stats, r.episodes);
    emit(m, "mnll", r.mnll_stats, r.episodes);
    emit(m, "detection_ratio", r.detection_stats, r.episodes);
  }
  if (!out.good()) throw IoError("failed writing results: " + path);
}

void write_episode_trace(const std::string& path, const EpisodeConfig& cfg,
                         Method method, const MlpParams* mlp,
                         std::uint64_t seed, const std::string& config_hash) {
  const EpisodeResult res = run_episode(cfg, method, mlp, seed);
  std::ofstream out(path);
  if (!out) throw IoError("cannot open trace for writing: " + path);
  const int num_targets = cfg.world.num_targets;
  out << "# lof episode trace v1 method=" << method_name(method)
      << " seed=" << seed << " config_hash=" << config_hash << "\n";
  out << "t";
  for (int j = 0; j < num_targets; ++j) {
    out << ",tgt" << j << ".x1,tgt" << j << ".x2,tgt" << j << ".v1,tgt" << j
        << ".v2";
    out << ",est" << j << ".x1,est" << j << ".x2,est" << j << ".v1,est" << j
        << ".v2";
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) out << ",cov" << j << "." << r << c;
  }
  out << "\n";
  char buf[40];
  const auto put = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out << ',' << buf;
  };
  for (size_t t = 0; t < res.fused.size(); ++t) {
    out << (t + 1);
    for (int j = 0; j < num_targets; ++j) {
      for (int k = 0; k < 4; ++k) put(res.truths[t][j](k));
      for (int k = 0; k < 4; ++k) put(res.fused[t][j].mean(k));
      for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) put(res.fused[t][j].cov(r, c));
    }
    out << "\n";
  }
  if (!out.good()) throw IoError("failed writing trace: " + path);
}

}  // namespace lof
