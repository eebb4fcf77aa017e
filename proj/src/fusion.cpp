#include "lof/fusion.hpp"

#include <cmath>

namespace lof {

Eigen::VectorXd normalize_weights(const Eigen::VectorXd& w) {
  const int n = static_cast<int>(w.size());
  for (int i = 0; i < n; ++i) {
    if (w(i) < 0.0) throw NegativeWeight("weight " + std::to_string(i) +
                                         " is negative");
  }
  const double total = w.sum();
  if (total <= 0.0) {
    return Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  }
  return w / total;
}

GaussianBelief mixture_moments(const std::vector<GaussianBelief>& estimates,
                               const Eigen::VectorXd& weights) {
  if (estimates.empty()) throw DimensionError("empty mixture");
  if (static_cast<int>(estimates.size()) != weights.size())
    throw DimensionError("weight count does not match component count");
  const int m = estimates.front().dim();
  for (const auto& e : estimates) {
    if (e.dim() != m || e.cov.rows() != m)
      throw DimensionError("mixture components differ in dimension");
  }

  Eigen::VectorXd mean = Eigen::VectorXd::Zero(m);
  for (size_t i = 0; i < estimates.size(); ++i)
    mean += weights(static_cast<int>(i)) * estimates[i].mean;

  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(m, m);
  for (size_t i = 0; i < estimates.size(); ++i) {
    const Eigen::VectorXd dev = estimates[i].mean - mean;
    cov += weights(static_cast<int>(i)) *
           (estimates[i].cov + dev * dev.transpose());
  }
  cov = 0.5 * (cov + cov.transpose()).eval();
  return {mean, cov};
}

Eigen::VectorXd soft_medoid_coeffs(const Eigen::VectorXd& weights,
                                   const Eigen::MatrixXd& distances, double t) {
  const int n = static_cast<int>(weights.size());
  Eigen::VectorXd scores(n);
  for (int i = 0; i < n; ++i) {
    scores(i) = -(distances.row(i).transpose().dot(weights)) / t;
  }
  const double hi = scores.maxCoeff();
  Eigen::VectorXd r = (scores.array() - hi).exp().matrix();
  return r / r.sum();
}

TsmState TsmState::init(int num_agents) {
  TsmState s;
  s.d = Eigen::MatrixXd::Zero(num_agents, num_agents);
  s.d_prev = Eigen::MatrixXd::Zero(num_agents, num_agents);
  s.tau_hat = Eigen::MatrixXd::Zero(num_agents, num_agents);
  s.j_prev = Eigen::MatrixXd::Zero(num_agents, num_agents);
  s.j_prev2 = Eigen::MatrixXd::Zero(num_agents, num_agents);
  s.t = 0;
  return s;
}

namespace {

Eigen::MatrixXd pairwise_divergences(const std::vector<GaussianBelief>& est,
                                     const JsdSpec& jsd) {
  const int n = static_cast<int>(est.size());
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int k = i + 1; k < n; ++k) {
      const double v = js_divergence(est[i], est[k], jsd);
      j(i, k) = v;
      j(k, i) = v;
    }
  }
  return j;
}

double stable_sigmoid(double x) {
  if (std::isinf(x)) return x > 0.0 ? 1.0 : 0.0;
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

TsmState tsm_update(const TsmState& state,
                    const std::vector<GaussianBelief>& estimates, double gamma,
                    const JsdSpec& jsd) {
  const Eigen::MatrixXd j = pairwise_divergences(estimates, jsd);
  TsmState next = state;
  if (state.t == 0) {
    next.d = j;
    next.d_prev = j;
    next.j_prev = j;
    next.j_prev2 = j;
    next.t = 1;
    return next;
  }

  if (state.t >= 2) {
    // curvature of the smoothed distance, lagged one step so the update
    // stays causal
    const Eigen::MatrixXd curvature =
        (state.d - state.d_prev) - (state.j_prev - state.j_prev2);
    next.tau_hat = state.tau_hat + gamma * curvature;
  }

  Eigen::MatrixXd tau = next.tau_hat;
  for (int i = 0; i < tau.rows(); ++i)
    for (int k = 0; k < tau.cols(); ++k) tau(i, k) = stable_sigmoid(tau(i, k));

  next.d = state.d + tau.cwiseProduct(j - state.d);
  next.d_prev = state.d;
  next.j_prev2 = state.j_prev;
  next.j_prev = j;
  next.t = state.t + 1;
  return next;
}

RobustFuseResult robust_fuse(const std::vector<GaussianBelief>& estimates,
                             const Eigen::VectorXd& raw_local_weights,
                             const TsmState& state, double temperature,
                             double gamma, const JsdSpec& jsd) {
  RobustFuseResult out;
  out.record.fusion_weights = normalize_weights(raw_local_weights);
  out.state = tsm_update(state, estimates, gamma, jsd);
  out.record.balancing = soft_medoid_coeffs(out.record.fusion_weights,
                                            out.state.d, temperature);
  out.record.effective = normalize_weights(
      out.record.balancing.cwiseProduct(out.record.fusion_weights));
  out.record.fused = mixture_moments(estimates, out.record.effective);
  return out;
}

}  // namespace lof
