#pragma once

#include <Eigen/Dense>
#include <vector>

#include "lof/gaussian.hpp"

namespace lof {

/// Normalizes nonnegative weights to sum 1. An all-zero input maps to the
/// uniform vector. Negative entries throw NegativeWeight.
Eigen::VectorXd normalize_weights(const Eigen::VectorXd& w);

/// Moments of the Gaussian mixture with the given (normalized) weights:
/// mean = sum w_i m_i, cov = sum w_i (S_i + (m_i - m)(m_i - m)^T).
GaussianBelief mixture_moments(const std::vector<GaussianBelief>& estimates,
                               const Eigen::VectorXd& weights);

/// Balancing coefficients: softmax over -(1/T) * sum_k w_k D(i,k).
/// T -> inf approaches the uniform vector (weighted average);
/// T -> 0 selects the weighted medoid.
Eigen::VectorXd soft_medoid_coeffs(const Eigen::VectorXd& weights,
                                   const Eigen::MatrixXd& distances, double t);

/// Time-smoothed pairwise distance state. d holds the latest smoothed
/// distances; the previous distance matrix and the two divergence snapshots
/// feed the discrete curvature estimate that drives the decay factor.
struct TsmState {
  Eigen::MatrixXd d;
  Eigen::MatrixXd d_prev;
  Eigen::MatrixXd tau_hat;
  Eigen::MatrixXd j_prev;
  Eigen::MatrixXd j_prev2;
  int t = 0;

  static TsmState init(int num_agents);
};

/// Advances the distance state with fresh pairwise divergences:
///   tau = sigmoid(tau_hat + gamma * curvature)
///   D_t = D_{t-1} + tau o (J_t - D_{t-1})
/// where curvature = (D_{t-1} - D_{t-2}) - (J_{t-1} - J_{t-2}) once two
/// steps of history exist. The first call sets D_1 = J_1 and leaves the
/// accumulators at their initial value.
TsmState tsm_update(const TsmState& state,
                    const std::vector<GaussianBelief>& estimates, double gamma,
                    const JsdSpec& jsd);

struct FusionRecord {
  GaussianBelief fused;
  Eigen::VectorXd fusion_weights;  // sums to 1; carried to the next step
  Eigen::VectorXd balancing;       // sums to 1
  Eigen::VectorXd effective;       // normalize(balancing o fusion_weights)
};

struct RobustFuseResult {
  FusionRecord record;
  TsmState state;
};

/// Robust fusion: normalize the raw weights, refresh the distance state,
/// compute balancing coefficients, and take mixture moments under the
/// rebalanced weights.
RobustFuseResult robust_fuse(const std::vector<GaussianBelief>& estimates,
                             const Eigen::VectorXd& raw_local_weights,
                             const TsmState& state, double temperature,
                             double gamma, const JsdSpec& jsd);

}  // namespace lof
