#include "lof/local_estimator.hpp"

#include <cmath>

namespace lof {

GaussianBelief kf_predict(const GaussianBelief& prior, const Eigen::MatrixXd& a,
                          const Eigen::MatrixXd& q) {
  GaussianBelief out;
  out.mean = a * prior.mean;
  out.cov = a * prior.cov * a.transpose() + q;
  out.cov = 0.5 * (out.cov + out.cov.transpose()).eval();
  return out;
}

GaussianBelief predict(const GaussianBelief& prior, const EvolutionModel& m) {
  return kf_predict(prior, m.a, m.q);
}

KfUpdateResult kf_update(const GaussianBelief& pred, const Eigen::MatrixXd& h,
                         const Eigen::MatrixXd& r,
                         const Eigen::VectorXd& innovation) {
  const Eigen::MatrixXd pht = pred.cov * h.transpose();
  Eigen::MatrixXd s = h * pht + r;
  s = 0.5 * (s + s.transpose()).eval();
  // S is PD whenever R is; factor it exactly so noise-free hand cases
  // come out bit-accurate
  const Eigen::MatrixXd l = cholesky_spd(s, 0.0);
  // K = P H^T S^-1 through the factor solves
  const Eigen::MatrixXd tmp =
      l.triangularView<Eigen::Lower>().solve(pht.transpose());
  const Eigen::MatrixXd k =
      l.transpose().triangularView<Eigen::Upper>().solve(tmp).transpose();

  KfUpdateResult out;
  out.posterior.mean = pred.mean + k * innovation;
  const Eigen::MatrixXd ikh =
      Eigen::MatrixXd::Identity(pred.dim(), pred.dim()) - k * h;
  out.posterior.cov = ikh * pred.cov;
  out.posterior.cov =
      0.5 * (out.posterior.cov + out.posterior.cov.transpose()).eval();
  out.innovation_cov = s;
  return out;
}

LocalEstimate update(const GaussianBelief& pred, const RangeBearing& obs,
                     const AgentPose& pose, const SensorModel& s) {
  const Eigen::Matrix<double, 2, 4> h = observation_jacobian(pose, pred.mean);
  const Eigen::Vector2d predicted =
      observe_ideal(pose, pred.mean, s.beta_deg);
  Eigen::Vector2d innovation;
  innovation(0) = obs.range - predicted(0);
  innovation(1) = bearing_residual(obs.bearing, predicted(1));

  const KfUpdateResult res = kf_update(pred, h, s.noise_cov(), innovation);
  LocalEstimate est;
  est.belief = res.posterior;
  est.innovation = innovation;
  est.innovation_cov = res.innovation_cov;
  est.observed = true;
  return est;
}

Eigen::Vector2d missing_innovation(const Eigen::Matrix2d& s) {
  const Eigen::MatrixXd l = cholesky_spd(s);
  const Eigen::Vector2d u(1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0));
  return 2.0 * (l * u);
}

LocalEstimate estimate_step(const GaussianBelief& prev_fusion,
                            const Observation& obs, const AgentPose& pose,
                            const EvolutionModel& evo, const SensorModel& sensor,
                            bool first_step) {
  const GaussianBelief pred =
      first_step ? prev_fusion : predict(prev_fusion, evo);
  if (obs.has_value()) {
    return update(pred, *obs, pose, sensor);
  }
  LocalEstimate est;
  est.belief = pred;
  const Eigen::Matrix<double, 2, 4> h = observation_jacobian(pose, pred.mean);
  Eigen::MatrixXd s = h * pred.cov * h.transpose() + sensor.noise_cov();
  s = 0.5 * (s + s.transpose()).eval();
  est.innovation_cov = s;
  est.innovation = missing_innovation(est.innovation_cov);
  est.observed = false;
  return est;
}

}  // namespace lof
