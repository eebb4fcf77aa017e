#include "lof/state_space.hpp"

#include <cmath>

namespace lof {

Eigen::Matrix4d evolution_matrix(double alpha_deg, double dt) {
  const double a = deg_to_rad(alpha_deg);
  Eigen::Matrix2d rot;
  rot << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.block<2, 2>(0, 2) = dt * rot;
  return m;
}

Eigen::Matrix4d process_noise_cov(double dt) {
  const Eigen::Matrix2d i2 = Eigen::Matrix2d::Identity();
  Eigen::Matrix4d q = Eigen::Matrix4d::Zero();
  q.block<2, 2>(0, 0) = (dt * dt * dt / 3.0) * i2;
  q.block<2, 2>(0, 2) = (dt * dt / 2.0) * i2;
  q.block<2, 2>(2, 0) = (dt * dt / 2.0) * i2;
  q.block<2, 2>(2, 2) = dt * i2;
  return q;
}

EvolutionModel EvolutionModel::make(double alpha_deg, double dt) {
  EvolutionModel m;
  m.alpha_deg = alpha_deg;
  m.dt = dt;
  m.a = evolution_matrix(alpha_deg, dt);
  m.q = process_noise_cov(dt);
  return m;
}

StateVec step_truth(const StateVec& x, const EvolutionModel& m,
                    RngStream& rng) {
  const Eigen::MatrixXd l = cholesky_psd(m.q, 0.0);
  Eigen::Vector4d z;
  for (int i = 0; i < 4; ++i) z(i) = rng.normal();
  return m.a * x + l * z;
}

Eigen::Vector2d observe_ideal(const AgentPose& pose, const StateVec& x,
                              double beta_deg) {
  const double dx = x(0) - pose.position(0);
  const double dy = x(1) - pose.position(1);
  const double r = std::hypot(dx, dy);
  const double phi =
      wrap_angle(std::atan2(dy, dx) - pose.heading + deg_to_rad(beta_deg));
  return {r, phi};
}

Observation observe(const AgentPose& pose, const StateVec& x,
                    const SensorModel& s, RngStream& rng) {
  const double dx = x(0) - pose.position(0);
  const double dy = x(1) - pose.position(1);
  const double r = std::hypot(dx, dy);
  if (r > s.max_range) return std::nullopt;
  // Visibility depends on true geometry; beta only skews the reading.
  const double rel = wrap_angle(std::atan2(dy, dx) - pose.heading);
  if (std::abs(rel) > 0.5 * deg_to_rad(s.fov_deg)) return std::nullopt;

  const Eigen::Vector2d ideal = observe_ideal(pose, x, s.beta_deg);
  const double nr = std::sqrt(s.rho) * s.sigma_r * rng.normal();
  const double nb = std::sqrt(s.rho) * s.sigma_b * rng.normal();
  RangeBearing rb;
  rb.range = std::max(0.0, ideal(0) + nr);
  rb.bearing = wrap_angle(ideal(1) + nb);
  return rb;
}

Eigen::Matrix<double, 2, 4> observation_jacobian(const AgentPose& pose,
                                                 const StateVec& x_pred) {
  const double dx = x_pred(0) - pose.position(0);
  const double dy = x_pred(1) - pose.position(1);
  const double r2 = dx * dx + dy * dy;
  const double r = std::sqrt(r2);
  if (r <= 1e-6) {
    throw DegenerateGeometry("target coincides with the observing agent");
  }
  Eigen::Matrix<double, 2, 4> h = Eigen::Matrix<double, 2, 4>::Zero();
  h(0, 0) = dx / r;
  h(0, 1) = dy / r;
  h(1, 0) = -dy / r2;
  h(1, 1) = dx / r2;
  return h;
}

}  // namespace lof
