#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "lof/pipeline.hpp"
#include "lof/sim_env.hpp"
#include "lof/weight_gen.hpp"

namespace lof {

/// Per-step loss: log det(S) + (x - m)^T S^-1 (x - m). Trajectory losses
/// average this over the horizon.
double nll_loss(const Eigen::VectorXd& truth, const GaussianBelief& fused);

struct NllGrad {
  Eigen::VectorXd d_mean;
  Eigen::MatrixXd d_cov;
};
NllGrad nll_gradients(const Eigen::VectorXd& truth, const GaussianBelief& fused);

/// dLoss/d(effective weight_i) through the mixture moments; the weighted
/// deviation sum vanishes on the simplex, leaving the direct term only.
Eigen::VectorXd mixture_weight_gradient(
    const std::vector<GaussianBelief>& estimates,
    const GaussianBelief& fused, const NllGrad& g);

/// dLoss/d(raw weight_j) through e = normalize(balancing o raw); the
/// balancing coefficients are held constant.
Eigen::VectorXd raw_weight_gradient(const Eigen::VectorXd& g_effective,
                                    const Eigen::VectorXd& effective,
                                    const Eigen::VectorXd& balancing,
                                    const Eigen::VectorXd& raw);

/// Seeds the recorded step onto the tape: analytic gradients of the
/// per-step loss flow through the fused moments, the weight normalization
/// and the likelihood product (previous weights detached) into the network
/// output nodes. `scale` multiplies the seeds (e.g. 1/(H*J*B)).
void accumulate_step_gradients(const PipelineStepRecord& rec,
                               const Eigen::VectorXd& truth, GradTape& tape,
                               double scale);

/// Recomputes the recorded step's loss under different parameters with the
/// balancing coefficients fixed at their recorded values. This is exactly
/// the function the analytic gradients differentiate; finite differences of
/// it validate them.
double replay_step_loss(const PipelineStepRecord& rec,
                        const Eigen::VectorXd& truth, const MlpParams& params);

struct AdamState {
  MlpParams m;
  MlpParams v;
  int t = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState init_like(const MlpParams& params);
};

/// Bias-corrected Adam update, in place.
void adam_step(MlpParams& params, const MlpParams& grads, AdamState& state,
               double learning_rate);

struct TrainConfig {
  int iterations = 500;
  int batch_size = 16;
  double learning_rate = 0.003;
  std::uint64_t seed = 1;
  double init_cov = 1.0;
  PipelineOptions pipeline;
  EvolutionModel evo;
  SensorModel sensor;
};

struct TrainLogEntry {
  int iteration = 0;
  double loss = 0.0;
  double grad_norm = 0.0;
  double wall_ms = 0.0;
};

struct TrainResult {
  MlpParams params;
  std::vector<TrainLogEntry> log;
};

/// Unrolls the two-stage pipeline over sampled trajectories, accumulates
/// the mean loss gradient and applies Adam, for cfg.iterations rounds.
TrainResult train(const Dataset& dataset, const TrainConfig& cfg);

/// Mean loss of the current parameters over a set of trajectories
/// (no gradients); used for train-time diagnostics and tests.
double dataset_loss(const Dataset& dataset, const std::vector<int>& indices,
                    const MlpParams& params, const TrainConfig& cfg);

void write_train_log(const std::string& path,
                     const std::vector<TrainLogEntry>& log,
                     const std::string& config_hash);

}  // namespace lof
