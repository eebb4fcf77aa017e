#include "lof/pipeline.hpp"

namespace lof {

PipelineStepRecord pipeline_step(TargetChain& chain,
                                 const std::vector<AgentSample>& samples,
                                 const EvolutionModel& evo,
                                 const SensorModel& sensor,
                                 const PipelineOptions& opts,
                                 const MlpParams* mlp, GradTape* tape,
                                 const MlpTapeBindings* binds) {
  const int num_agents = static_cast<int>(samples.size());
  const bool first_step = chain.t == 0;

  PipelineStepRecord rec;
  rec.prev_weights = chain.weights;
  rec.locals.reserve(num_agents);
  rec.likelihoods = Eigen::VectorXd::Zero(num_agents);
  rec.mlp_outputs = Eigen::VectorXd::Zero(num_agents);
  rec.raw_weights = Eigen::VectorXd::Zero(num_agents);
  rec.mlp_nodes.assign(num_agents, -1);

  for (int i = 0; i < num_agents; ++i) {
    rec.locals.push_back(estimate_step(chain.fused, samples[i].obs,
                                       samples[i].pose, evo, sensor,
                                       first_step));
  }

  for (int i = 0; i < num_agents; ++i) {
    switch (opts.weight_mode) {
      case WeightMode::kUniform:
        rec.likelihoods(i) = 1.0;
        rec.mlp_outputs(i) = 1.0;
        rec.raw_weights(i) = rec.prev_weights(i);
        break;
      case WeightMode::kExactLikelihood: {
        const double lik = exact_likelihood(rec.locals[i].innovation,
                                            rec.locals[i].innovation_cov);
        rec.likelihoods(i) = lik;
        rec.mlp_outputs(i) = lik;
        rec.raw_weights(i) = local_weight(lik, rec.prev_weights(i));
        break;
      }
      case WeightMode::kMlp: {
        const double lik = exact_likelihood(rec.locals[i].innovation,
                                            rec.locals[i].innovation_cov);
        rec.likelihoods(i) = lik;
        double learned;
        if (tape != nullptr && binds != nullptr) {
          rec.mlp_nodes[i] = mlp_forward_node(*tape, *binds, lik,
                                              rec.locals[i].innovation);
          learned = tape->scalar_value(rec.mlp_nodes[i]);
        } else {
          GradTape scratch;
          learned = mlp_forward(*mlp, lik, rec.locals[i].innovation, scratch);
        }
        rec.mlp_outputs(i) = learned;
        rec.raw_weights(i) = local_weight(learned, rec.prev_weights(i));
        break;
      }
    }
  }

  std::vector<GaussianBelief> beliefs;
  beliefs.reserve(num_agents);
  for (const auto& l : rec.locals) beliefs.push_back(l.belief);

  if (opts.fusion_mode == FusionMode::kRobust) {
    RobustFuseResult res = robust_fuse(beliefs, rec.raw_weights, chain.tsm,
                                       opts.temperature, opts.gamma, opts.jsd);
    rec.fusion = std::move(res.record);
    chain.tsm = std::move(res.state);
  } else {
    rec.fusion.fusion_weights = normalize_weights(rec.raw_weights);
    rec.fusion.balancing = Eigen::VectorXd::Constant(
        num_agents, 1.0 / static_cast<double>(num_agents));
    rec.fusion.effective = rec.fusion.fusion_weights;
    rec.fusion.fused = mixture_moments(beliefs, rec.fusion.effective);
  }

  chain.fused = rec.fusion.fused;
  chain.weights = rec.fusion.fusion_weights;
  ++chain.t;
  return rec;
}

}  // namespace lof
