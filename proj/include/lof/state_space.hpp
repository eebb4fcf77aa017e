#pragma once

#include <Eigen/Dense>
#include <optional>

#include "lof/common.hpp"
#include "lof/gaussian.hpp"
#include "lof/rng.hpp"

namespace lof {

/// State layout: [x1, x2, v1, v2] (meters, meters/second).
using StateVec = Eigen::Vector4d;

/// Range-bearing measurement in meters / radians.
struct RangeBearing {
  double range = 0.0;
  double bearing = 0.0;
};

/// A measurement sample; empty means the target was not observed.
using Observation = std::optional<RangeBearing>;

/// Constant-velocity evolution with the velocity-to-position coupling
/// rotated by alpha. alpha = 0 is the nominal model.
struct EvolutionModel {
  double alpha_deg = 0.0;
  double dt = 0.5;
  Eigen::Matrix4d a = Eigen::Matrix4d::Identity();
  Eigen::Matrix4d q = Eigen::Matrix4d::Zero();

  static EvolutionModel make(double alpha_deg, double dt);
};

Eigen::Matrix4d evolution_matrix(double alpha_deg, double dt);
Eigen::Matrix4d process_noise_cov(double dt);

/// x' = A x + u with u ~ N(0, Q); deterministic given the stream state.
StateVec step_truth(const StateVec& x, const EvolutionModel& m, RngStream& rng);

/// Range-bearing sensor with a bearing offset beta (beta = 0 nominal),
/// noise scale rho, and limited field of view / range.
struct SensorModel {
  double beta_deg = 0.0;
  double rho = 1.0;
  double sigma_r = 0.2;    // meters
  double sigma_b = 0.01;   // radians
  double fov_deg = 100.0;
  double max_range = 10.0;

  Eigen::Matrix2d noise_cov() const {
    Eigen::Matrix2d r = Eigen::Matrix2d::Zero();
    r(0, 0) = rho * sigma_r * sigma_r;
    r(1, 1) = rho * sigma_b * sigma_b;
    return r;
  }
};

struct AgentPose {
  Eigen::Vector2d position = Eigen::Vector2d::Zero();
  double heading = 0.0;  // radians, wrapped to (-pi, pi]
};

/// Noise-free measurement function h(pose, x) = [range; bearing].
Eigen::Vector2d observe_ideal(const AgentPose& pose, const StateVec& x,
                              double beta_deg);

/// Gated, noisy observation: empty when the target is beyond max_range or
/// outside the field-of-view cone centered on the agent heading.
Observation observe(const AgentPose& pose, const StateVec& x,
                    const SensorModel& s, RngStream& rng);

/// 2x4 Jacobian of h at the predicted target state; velocity columns are
/// zero. Throws DegenerateGeometry when the range is below 1e-6.
Eigen::Matrix<double, 2, 4> observation_jacobian(const AgentPose& pose,
                                                 const StateVec& x_pred);

/// Wrapped residual between two bearings, in (-pi, pi].
inline double bearing_residual(double observed, double predicted) {
  return wrap_angle(observed - predicted);
}

}  // namespace lof
