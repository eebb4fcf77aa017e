#pragma once

#include <Eigen/Dense>
#include <vector>

#include "lof/fusion.hpp"
#include "lof/local_estimator.hpp"
#include "lof/state_space.hpp"
#include "lof/weight_gen.hpp"

namespace lof {

/// How local weights are produced each step.
enum class WeightMode {
  kMlp,              // learned likelihood correction
  kExactLikelihood,  // innovation density only
  kUniform,          // constant weights, no likelihood machinery
};

enum class FusionMode { kRobust, kPlainMixture };

struct PipelineOptions {
  WeightMode weight_mode = WeightMode::kMlp;
  FusionMode fusion_mode = FusionMode::kRobust;
  double temperature = 100.0;
  double gamma = 0.001;
  JsdSpec jsd;
};

/// Rolling state of one target's fusion chain.
struct TargetChain {
  GaussianBelief fused;
  Eigen::VectorXd weights;  // previous fusion weights, sum 1
  TsmState tsm;
  int t = 0;

  static TargetChain init(const GaussianBelief& initial, int num_agents) {
    TargetChain c;
    c.fused = initial;
    c.weights = Eigen::VectorXd::Constant(
        num_agents, 1.0 / static_cast<double>(num_agents));
    c.tsm = TsmState::init(num_agents);
    c.t = 0;
    return c;
  }
};

struct AgentSample {
  AgentPose pose;
  Observation obs;
};

/// Everything one step produced, kept for the backward pass.
struct PipelineStepRecord {
  std::vector<LocalEstimate> locals;
  Eigen::VectorXd likelihoods;   // innovation densities
  Eigen::VectorXd mlp_outputs;   // learned likelihoods (kMlp) or copies
  std::vector<int> mlp_nodes;    // tape node ids when recorded
  Eigen::VectorXd prev_weights;  // weights entering the step
  Eigen::VectorXd raw_weights;
  FusionRecord fusion;
};

/// Advances one target's chain by a step. When `tape` is non-null and the
/// mode is kMlp, the weight computation is recorded for backpropagation.
PipelineStepRecord pipeline_step(TargetChain& chain,
                                 const std::vector<AgentSample>& samples,
                                 const EvolutionModel& evo,
                                 const SensorModel& sensor,
                                 const PipelineOptions& opts,
                                 const MlpParams* mlp, GradTape* tape,
                                 const MlpTapeBindings* binds);

}  // namespace lof
