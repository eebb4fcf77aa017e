#include "lof/baselines.hpp"

namespace lof {

GaussianBelief bci_fuse(const std::vector<GaussianBelief>& estimates,
                        BciWeightRule rule) {
  if (estimates.empty()) throw DimensionError("bci_fuse needs estimates");
  const int m = estimates.front().dim();
  const int n = static_cast<int>(estimates.size());
  for (const auto& e : estimates) {
    if (e.dim() != m) throw DimensionError("estimate dimensions differ");
  }

  Eigen::VectorXd omega(n);
  for (int i = 0; i < n; ++i) {
    switch (rule) {
      case BciWeightRule::kInverseTrace:
        omega(i) = 1.0 / estimates[i].cov.trace();
        break;
      case BciWeightRule::kInverseDet:
        omega(i) = 1.0 / std::max(estimates[i].cov.determinant(), 1e-300);
        break;
      case BciWeightRule::kUniform:
        omega(i) = 1.0;
        break;
    }
  }
  omega /= omega.sum();

  Eigen::MatrixXd info = Eigen::MatrixXd::Zero(m, m);
  Eigen::VectorXd info_mean = Eigen::VectorXd::Zero(m);
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(m, m);
  for (int i = 0; i < n; ++i) {
    const Eigen::MatrixXd l = cholesky_spd(estimates[i].cov, 0.0);
    const Eigen::MatrixXd linv = l.triangularView<Eigen::Lower>().solve(eye);
    const Eigen::MatrixXd inv = linv.transpose() * linv;
    info += omega(i) * inv;
    info_mean += omega(i) * (inv * estimates[i].mean);
  }
  info = 0.5 * (info + info.transpose()).eval();

  const Eigen::MatrixXd l = cholesky_spd(info, 0.0);
  const Eigen::MatrixXd linv = l.triangularView<Eigen::Lower>().solve(eye);
  GaussianBelief fused;
  fused.cov = linv.transpose() * linv;
  fused.cov = 0.5 * (fused.cov + fused.cov.transpose()).eval();
  fused.mean = fused.cov * info_mean;
  return fused;
}

GaussianBelief skf_fuse(
    const GaussianBelief& prior,
    const std::vector<std::pair<AgentPose, Observation>>& observations,
    const EvolutionModel& evo, const SensorModel& sensor, bool first_step) {
  GaussianBelief belief = first_step ? prior : predict(prior, evo);
  for (const auto& [pose, obs] : observations) {
    if (!obs.has_value()) continue;
    belief = update(belief, *obs, pose, sensor).belief;
  }
  return belief;
}

}  // namespace lof
