#pragma once

#include <Eigen/Dense>

#include "lof/gaussian.hpp"
#include "lof/state_space.hpp"

namespace lof {

/// One agent's per-step output: posterior belief, innovation, innovation
/// covariance, and whether an observation was actually consumed. When
/// observed is false the innovation carries the synthetic value placed at
/// Mahalanobis distance 2 from the predicted measurement.
struct LocalEstimate {
  GaussianBelief belief;
  Eigen::Vector2d innovation = Eigen::Vector2d::Zero();
  Eigen::Matrix2d innovation_cov = Eigen::Matrix2d::Identity();
  bool observed = false;
};

/// Kalman prediction: N(A x, A S A^T + Q). Works for any state dimension.
GaussianBelief kf_predict(const GaussianBelief& prior, const Eigen::MatrixXd& a,
                          const Eigen::MatrixXd& q);

/// Prediction under the assumed evolution model.
GaussianBelief predict(const GaussianBelief& prior, const EvolutionModel& m);

/// Linear(ized) measurement update with a precomputed innovation. Returns
/// the posterior and the innovation covariance S = H P H^T + R. The
/// posterior covariance is (I - K H) P, re-symmetrized.
struct KfUpdateResult {
  GaussianBelief posterior;
  Eigen::MatrixXd innovation_cov;
};
KfUpdateResult kf_update(const GaussianBelief& pred, const Eigen::MatrixXd& h,
                         const Eigen::MatrixXd& r,
                         const Eigen::VectorXd& innovation);

/// Range-bearing EKF update; the bearing residual is wrapped.
LocalEstimate update(const GaussianBelief& pred, const RangeBearing& obs,
                     const AgentPose& pose, const SensorModel& s);

/// Synthetic innovation for a missing observation: 2 L u with L the
/// Cholesky factor of S and u = (1,1)/sqrt(2), so that the Mahalanobis
/// distance of the result is exactly 2.
Eigen::Vector2d missing_innovation(const Eigen::Matrix2d& s);

/// Full per-agent step: predict from the previous fusion state, then either
/// apply the measurement update or fall back to the prediction with the
/// synthetic innovation. When first_step is true the prediction is skipped
/// and the prior is used directly (the prior already refers to this step).
LocalEstimate estimate_step(const GaussianBelief& prev_fusion,
                            const Observation& obs, const AgentPose& pose,
                            const EvolutionModel& evo, const SensorModel& sensor,
                            bool first_step = false);

}  // namespace lof
