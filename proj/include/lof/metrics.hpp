#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "lof/baselines.hpp"
#include "lof/pipeline.hpp"
#include "lof/sim_env.hpp"

namespace lof {

/// 10 log10(mse). Throws NonPositive on a non-positive argument.
double mse_db(double mse);

/// Improvement over the average single-agent error:
/// (sum e_i - e * I) / sum e_i * 100.
double fusion_gain(const Eigen::VectorXd& local_mses, double fused_mse);

/// Mean of -log N(truth; mean, cov) over the fused beliefs.
double mnll(const std::vector<Eigen::VectorXd>& truths,
            const std::vector<GaussianBelief>& beliefs);

/// Fraction of samples whose position error is within the threshold.
double detection_ratio(const std::vector<Eigen::VectorXd>& truths,
                       const std::vector<Eigen::VectorXd>& fused_means,
                       double threshold);

enum class Method { kLof, kLofTm, kLofM, kBci, kSkf };

Method parse_method(const std::string& name);
std::string method_name(Method m);

struct EpisodeConfig {
  WorldConfig world;
  double init_cov = 1.0;
  PipelineOptions pipeline;
  BciWeightRule bci_rule = BciWeightRule::kInverseTrace;
  double detection_threshold = 0.646;
  /// MSE over position components only (default) or the full state.
  bool mse_position_only = true;
};

struct EpisodeResult {
  std::vector<std::vector<GaussianBelief>> fused;      // [step][target]
  std::vector<std::vector<Eigen::VectorXd>> truths;    // [step][target]
  std::vector<double> step_nll;                        // per (step, target)
  std::vector<bool> detection_flags;                   // per (step, target)
  Eigen::VectorXd local_mse;                           // per agent, no fusion
  double fused_mse = 0.0;
  double mnll_value = 0.0;
  double detection = 0.0;
};

/// Rolls out one episode: the simulated world, the per-agent no-fusion
/// reference chains (for the gain denominator), and the chosen fusion
/// method. `mlp` is required for Method::kLof; passing null selects the
/// pass-through weight path (test hook).
EpisodeResult run_episode(const EpisodeConfig& cfg, Method method,
                          const MlpParams* mlp, std::uint64_t seed);

struct MetricStats {
  double mean = 0.0;
  double stddev = 0.0;
};

struct MethodMetrics {
  Method method = Method::kLof;
  MetricStats mse_db_stats;
  MetricStats fg_stats;
  MetricStats mnll_stats;
  MetricStats detection_stats;
  int episodes = 0;
};

/// Runs n episodes per method with paired per-episode seeds derived from
/// `seed` and aggregates the four metrics.
std::vector<MethodMetrics> evaluate(const EpisodeConfig& cfg,
                                    const std::vector<Method>& methods,
                                    int n_episodes, std::uint64_t seed,
                                    const MlpParams* mlp, int threads = 1);

/// CSV rows: method,metric,mean,std,n,config_hash
void write_results_csv(const std::string& path,
                       const std::vector<MethodMetrics>& rows,
                       const std::string& config_hash);

/// Single-episode trace: the dataset line format followed by per-target
/// fused mean and covariance.
void write_episode_trace(const std::string& path, const EpisodeConfig& cfg,
                         Method method, const MlpParams* mlp,
                         std::uint64_t seed, const std::string& config_hash);

}  // namespace lof
