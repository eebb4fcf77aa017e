#include "lof/training.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace lof {

double nll_loss(const Eigen::VectorXd& truth, const GaussianBelief& fused) {
  const Eigen::MatrixXd l = cholesky_spd(fused.cov);
  double logdet = 0.0;
  for (int i = 0; i < l.rows(); ++i) logdet += std::log(l(i, i));
  logdet *= 2.0;
  const Eigen::VectorXd z =
      l.triangularView<Eigen::Lower>().solve(truth - fused.mean);
  return logdet + z.squaredNorm();
}

NllGrad nll_gradients(const Eigen::VectorXd& truth,
                      const GaussianBelief& fused) {
  const int m = fused.dim();
  const Eigen::MatrixXd l = cholesky_spd(fused.cov);
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(m, m);
  const Eigen::MatrixXd linv = l.triangularView<Eigen::Lower>().solve(eye);
  const Eigen::MatrixXd prec = linv.transpose() * linv;
  const Eigen::VectorXd r = truth - fused.mean;
  const Eigen::VectorXd pr = prec * r;

  NllGrad g;
  g.d_mean = -2.0 * pr;
  g.d_cov = prec - pr * pr.transpose();
  return g;
}

Eigen::VectorXd mixture_weight_gradient(
    const std::vector<GaussianBelief>& estimates, const GaussianBelief& fused,
    const NllGrad& g) {
  const int n = static_cast<int>(estimates.size());
  Eigen::VectorXd out(n);
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd dev = estimates[i].mean - fused.mean;
    const Eigen::MatrixXd contrib = estimates[i].cov + dev * dev.transpose();
    out(i) = g.d_mean.dot(estimates[i].mean) +
             (g.d_cov.array() * contrib.array()).sum();
  }
  return out;
}

Eigen::VectorXd raw_weight_gradient(const Eigen::VectorXd& g_effective,
                                    const Eigen::VectorXd& effective,
                                    const Eigen::VectorXd& balancing,
                                    const Eigen::VectorXd& raw) {
  const int n = static_cast<int>(raw.size());
  const double z = balancing.dot(raw);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
  if (z <= 0.0) return out;  // degenerate all-zero step, not differentiable
  const double mixed = g_effective.dot(effective);
  for (int j = 0; j < n; ++j) {
    out(j) = balancing(j) * (g_effective(j) - mixed) / z;
  }
  return out;
}

void accumulate_step_gradients(const PipelineStepRecord& rec,
                               const Eigen::VectorXd& truth, GradTape& tape,
                               double scale) {
  if (tape.empty()) throw EmptyTape("step was not recorded on a tape");
  const NllGrad g = nll_gradients(truth, rec.fusion.fused);
  std::vector<GaussianBelief> beliefs;
  beliefs.reserve(rec.locals.size());
  for (const auto& l : rec.locals) beliefs.push_back(l.belief);

  const Eigen::VectorXd g_eff =
      mixture_weight_gradient(beliefs, rec.fusion.fused, g);
  const Eigen::VectorXd g_raw = raw_weight_gradient(
      g_eff, rec.fusion.effective, rec.fusion.balancing, rec.raw_weights);

  std::vector<std::pair<int, double>> seeds;
  seeds.reserve(rec.locals.size());
  for (size_t i = 0; i < rec.locals.size(); ++i) {
    if (rec.mlp_nodes[i] < 0) continue;
    const double seed =
        scale * g_raw(static_cast<int>(i)) * rec.prev_weights(static_cast<int>(i));
    seeds.emplace_back(rec.mlp_nodes[i], seed);
  }
  if (!seeds.empty()) tape.backward_multi(seeds);
}

double replay_step_loss(const PipelineStepRecord& rec,
                        const Eigen::VectorXd& truth, const MlpParams& params) {
  const int n = static_cast<int>(rec.locals.size());
  Eigen::VectorXd raw(n);
  GradTape scratch;
  for (int i = 0; i < n; ++i) {
    const double learned = mlp_forward(params, rec.likelihoods(i),
                                       rec.locals[i].innovation, scratch);
    raw(i) = learned * rec.prev_weights(i);
    scratch.clear();
  }
  const Eigen::VectorXd effective =
      normalize_weights(rec.fusion.balancing.cwiseProduct(raw));
  std::vector<GaussianBelief> beliefs;
  beliefs.reserve(rec.locals.size());
  for (const auto& l : rec.locals) beliefs.push_back(l.belief);
  return nll_loss(truth, mixture_moments(beliefs, effective));
}

AdamState AdamState::init_like(const MlpParams& params) {
  AdamState s;
  s.m = params;
  s.v = params;
  s.m.set_zero();
  s.v.set_zero();
  s.t = 0;
  return s;
}

void adam_step(MlpParams& params, const MlpParams& grads, AdamState& state,
               double learning_rate) {
  if (!params.same_shape(grads) || !params.same_shape(state.m))
    throw ShapeMismatch("adam tensors disagree in shape");
  state.t += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, state.t);
  const double bc2 = 1.0 - std::pow(state.beta2, state.t);
  auto p = params.tensors();
  const auto g = grads.tensors();
  auto m = state.m.tensors();
  auto v = state.v.tensors();
  for (size_t k = 0; k < p.size(); ++k) {
    *m[k] = state.beta1 * *m[k] + (1.0 - state.beta1) * *g[k];
    *v[k] = state.beta2 * *v[k] +
            (1.0 - state.beta2) * g[k]->cwiseProduct(*g[k]);
    const Eigen::MatrixXd m_hat = *m[k] / bc1;
    const Eigen::MatrixXd v_hat = *v[k] / bc2;
    p[k]->array() -= learning_rate * m_hat.array() /
                     (v_hat.array().sqrt() + state.eps);
  }
}

namespace {

struct TrajectoryPass {
  double loss = 0.0;
};

/// Unrolls one trajectory; when `tape`/`grads` are set, records and
/// accumulates scaled gradients.
TrajectoryPass run_trajectory(const Trajectory& traj, const MlpParams& params,
                              const TrainConfig& cfg, MlpParams* grads,
                              double grad_scale) {
  TrajectoryPass out;
  const int num_targets = static_cast<int>(traj.steps.front().targets.size());
  const int num_agents = static_cast<int>(traj.steps.front().agents.size());
  const int horizon = static_cast<int>(traj.steps.size());
  const double step_scale = 1.0 / static_cast<double>(horizon * num_targets);

  GradTape tape;
  for (int j = 0; j < num_targets; ++j) {
    GaussianBelief init = GaussianBelief::isotropic(
        Eigen::VectorXd(traj.steps.front().targets[j]), cfg.init_cov);
    TargetChain chain = TargetChain::init(init, num_agents);
    for (int t = 0; t < horizon; ++t) {
      const TrajectoryStep& step = traj.steps[t];
      std::vector<AgentSample> samples(num_agents);
      for (int i = 0; i < num_agents; ++i) {
        samples[i].pose = step.agents[i];
        samples[i].obs = step.obs[i][j];
      }
      const Eigen::VectorXd truth = step.targets[j];
      if (grads != nullptr) {
        tape.clear();
        const MlpTapeBindings binds = bind_mlp_params(tape, params, grads);
        PipelineStepRecord rec =
            pipeline_step(chain, samples, cfg.evo, cfg.sensor, cfg.pipeline,
                          &params, &tape, &binds);
        out.loss += step_scale * nll_loss(truth, rec.fusion.fused);
        accumulate_step_gradients(rec, truth, tape, grad_scale * step_scale);
      } else {
        PipelineStepRecord rec =
            pipeline_step(chain, samples, cfg.evo, cfg.sensor, cfg.pipeline,
                          &params, nullptr, nullptr);
        out.loss += step_scale * nll_loss(truth, rec.fusion.fused);
      }
    }
  }
  return out;
}

}  // namespace

double dataset_loss(const Dataset& dataset, const std::vector<int>& indices,
                    const MlpParams& params, const TrainConfig& cfg) {
  double total = 0.0;
  for (int idx : indices) {
    total += run_trajectory(dataset.trajectories[idx], params, cfg, nullptr,
                            0.0)
                 .loss;
  }
  return total / static_cast<double>(indices.size());
}

TrainResult train(const Dataset& dataset, const TrainConfig& cfg) {
  if (dataset.trajectories.empty())
    throw ConfigError("training dataset is empty");
  if (cfg.iterations < 1 || cfg.batch_size < 1 || cfg.learning_rate < 0.0 ||
      cfg.learning_rate >= 1.0)
    throw ConfigError("invalid training configuration");
  if (cfg.pipeline.weight_mode != WeightMode::kMlp)
    throw ConfigError("training requires the learned weight mode");

  TrainResult res;
  res.params = MlpParams::glorot(cfg.seed);
  AdamState adam = AdamState::init_like(res.params);
  RngStream batch_rng(derive_seed(cfg.seed, 0xb47c4));
  const int n = static_cast<int>(dataset.trajectories.size());

  MlpParams grads = MlpParams::zeros();
  for (int iter = 1; iter <= cfg.iterations; ++iter) {
    const auto start = std::chrono::steady_clock::now();
    grads.set_zero();
    double loss = 0.0;
    const double scale = 1.0 / static_cast<double>(cfg.batch_size);
    for (int b = 0; b < cfg.batch_size; ++b) {
      const int idx = batch_rng.uniform_int(0, n - 1);
      loss += scale * run_trajectory(dataset.trajectories[idx], res.params,
                                     cfg, &grads, scale)
                          .loss;
    }
    adam_step(res.params, grads, adam, cfg.learning_rate);
    const auto end = std::chrono::steady_clock::now();

    TrainLogEntry e;
    e.iteration = iter;
    e.loss = loss;
    e.grad_norm = std::sqrt(grads.squared_norm());
    e.wall_ms =
        std::chrono::duration<double, std::milli>(end - start).count();
    res.log.push_back(e);
  }
  return res;
}

void write_train_log(const std::string& path,
                     const std::vector<TrainLogEntry>& log,
                     const std::string& config_hash) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open training log for writing: " + path);
  out << "# config_hash=" << config_hash << "\n";
  out << "iteration,loss,grad_norm,wall_ms\n";
  char buf[128];
  for (const auto& e : log) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.3f\n", e.iteration,
                  e.loss, e.grad_norm, e.wall_ms);
    out << buf;
  }
  if (!out.good()) throw IoError("failed writing training log: " + path);
}

}  // namespace lof
