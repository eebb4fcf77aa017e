#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "lof/local_estimator.hpp"
#include "lof/rng.hpp"

using namespace lof;

namespace {

GaussianBelief scalar(double mean, double var) {
  Eigen::VectorXd m(1);
  m << mean;
  Eigen::MatrixXd c(1, 1);
  c << var;
  return {m, c};
}

Eigen::Matrix2d random_spd2(RngStream& rng) {
  Eigen::Matrix2d a;
  a << rng.normal(), rng.normal(), rng.normal(), rng.normal();
  return a * a.transpose() + 0.1 * Eigen::Matrix2d::Identity();
}

/// Brute-force discretized Bayes filter on a 1-D linear system.
struct GridFilter {
  std::vector<double> xs;
  std::vector<double> p;
  double h;

  GridFilter(double lo, double hi, int n) : h((hi - lo) / n) {
    for (int i = 0; i <= n; ++i) xs.push_back(lo + h * i);
    p.assign(xs.size(), 0.0);
  }

  void set_gaussian(double mean, double var) {
    for (size_t i = 0; i < xs.size(); ++i)
      p[i] = std::exp(-0.5 * (xs[i] - mean) * (xs[i] - mean) / var);
    normalize();
  }

  void normalize() {
    double z = 0.0;
    for (const double v : p) z += v;
    for (double& v : p) v /= z;
  }

  void predict(double a, double q) {
    std::vector<double> next(p.size(), 0.0);
    const double width = 8.0 * std::sqrt(q);
    const int reach = static_cast<int>(width / h) + 1;
    for (size_t i = 0; i < xs.size(); ++i) {
      if (p[i] == 0.0) continue;
      const double mean = a * xs[i];
      const int center = static_cast<int>((mean - xs.front()) / h);
      const int lo = std::max(0, center - reach);
      const int hi = std::min(static_cast<int>(xs.size()) - 1, center + reach);
      for (int k = lo; k <= hi; ++k) {
        const double d = xs[k] - mean;
        next[k] += p[i] * std::exp(-0.5 * d * d / q);
      }
    }
    p = std::move(next);
    normalize();
  }

  void update(double y, double r) {
    for (size_t i = 0; i < xs.size(); ++i)
      p[i] *= std::exp(-0.5 * (y - xs[i]) * (y - xs[i]) / r);
    normalize();
  }

  double mean() const {
    double m = 0.0;
    for (size_t i = 0; i < xs.size(); ++i) m += xs[i] * p[i];
    return m;
  }
};

}  // namespace

TEST_CASE("prediction propagates moments") {
  EvolutionModel m = EvolutionModel::make(0.0, 0.5);

  GaussianBelief zero{Eigen::Vector4d::Zero(), Eigen::Matrix4d::Zero()};
  const GaussianBelief pred = predict(zero, m);
  CHECK(pred.mean.norm() == 0.0);
  CHECK((pred.cov - m.q).norm() == doctest::Approx(0.0).epsilon(1e-15));

  GaussianBelief moving{Eigen::Vector4d(0, 0, 1, 0),
                        Eigen::Matrix4d::Identity()};
  const GaussianBelief p2 = predict(moving, m);
  CHECK(p2.mean(0) == doctest::Approx(0.5));
  CHECK(p2.mean(1) == doctest::Approx(0.0));
  CHECK(p2.mean(2) == doctest::Approx(1.0));

  // scalar analogue: identity dynamics, no noise
  Eigen::MatrixXd a(1, 1), q(1, 1);
  a << 1.0;
  q << 0.0;
  const GaussianBelief s = kf_predict(scalar(0.4, 1.2), a, q);
  CHECK(s.mean(0) == doctest::Approx(0.4));
  CHECK(s.cov(0, 0) == doctest::Approx(1.2));
}

TEST_CASE("scalar update matches hand algebra") {
  Eigen::MatrixXd h(1, 1), r(1, 1);
  h << 1.0;
  r << 1.0;
  Eigen::VectorXd innovation(1);
  innovation << 1.0;  // y - x_hat = 1 - 0
  const KfUpdateResult res = kf_update(scalar(0.0, 1.0), h, r, innovation);
  CHECK(res.posterior.mean(0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(res.posterior.cov(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(res.innovation_cov(0, 0) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("uninformative observation leaves the prediction intact") {
  SensorModel s;
  s.rho = 1e12;
  AgentPose pose;
  GaussianBelief pred{Eigen::Vector4d(5, 1, 0.2, -0.3),
                      Eigen::Matrix4d::Identity()};
  RangeBearing rb;
  rb.range = 5.0;
  rb.bearing = 0.3;
  const LocalEstimate est = update(pred, rb, pose, s);
  CHECK((est.belief.mean - pred.mean).norm() < 1e-4);
  CHECK((est.belief.cov - pred.cov).norm() < 1e-4);
}

TEST_CASE("zero innovation keeps the predicted mean") {
  SensorModel s;
  AgentPose pose;
  GaussianBelief pred{Eigen::Vector4d(3, 4, 0, 0), Eigen::Matrix4d::Identity()};
  const Eigen::Vector2d ideal = observe_ideal(pose, pred.mean, 0.0);
  RangeBearing rb{ideal(0), ideal(1)};
  const LocalEstimate est = update(pred, rb, pose, s);
  CHECK((est.belief.mean - pred.mean).norm() == doctest::Approx(0.0));
  CHECK(est.innovation.norm() == doctest::Approx(0.0));
}

TEST_CASE("missing innovation sits exactly at mahalanobis two") {
  const Eigen::Vector2d d1 = missing_innovation(Eigen::Matrix2d::Identity());
  CHECK(d1(0) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-9));
  CHECK(d1(1) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-9));

  const Eigen::Vector2d d4 =
      missing_innovation(4.0 * Eigen::Matrix2d::Identity());
  CHECK(d4(0) == doctest::Approx(2.0 * std::sqrt(2.0)).epsilon(1e-9));

  RngStream rng(6);
  for (int k = 0; k < 50; ++k) {
    const Eigen::Matrix2d s = random_spd2(rng);
    const Eigen::Vector2d dy = missing_innovation(s);
    CHECK(mahalanobis(dy, s) == doctest::Approx(2.0).epsilon(1e-6));
  }
}

TEST_CASE("estimate_step contract") {
  const EvolutionModel evo = EvolutionModel::make(0.0, 0.5);
  SensorModel sensor;
  GaussianBelief fused{Eigen::Vector4d(5, 5, 0.5, 0.2),
                       Eigen::Matrix4d::Identity()};
  AgentPose p1{{0.0, 0.0}, 0.7};
  AgentPose p2{{9.0, 3.0}, -2.0};

  // every agent seeded from the same fusion state predicts identically
  const LocalEstimate a = estimate_step(fused, std::nullopt, p1, evo, sensor);
  const LocalEstimate b = estimate_step(fused, std::nullopt, p2, evo, sensor);
  const GaussianBelief pred = predict(fused, evo);
  CHECK((a.belief.mean - pred.mean).norm() == doctest::Approx(0.0));
  CHECK((b.belief.mean - pred.mean).norm() == doctest::Approx(0.0));
  CHECK((a.belief.cov - pred.cov).norm() == doctest::Approx(0.0));
  CHECK_FALSE(a.observed);

  // a measurement shrinks the covariance trace
  RngStream rng(77);
  int shrunk = 0;
  for (int k = 0; k < 100; ++k) {
    GaussianBelief f{Eigen::Vector4d(rng.uniform(2, 28), rng.uniform(2, 28),
                                     rng.normal(), rng.normal()),
                     Eigen::Matrix4d::Identity() * rng.uniform(0.2, 2.0)};
    AgentPose pose{{rng.uniform(0, 30), rng.uniform(0, 30)},
                   rng.uniform(-3, 3)};
    const GaussianBelief pr = predict(f, evo);
    if ((pr.mean.head(2) - pose.position).norm() < 1e-3) continue;
    const Eigen::Vector2d ideal = observe_ideal(pose, pr.mean, 0.0);
    RangeBearing rb{ideal(0) + 0.1, ideal(1) + 0.005};
    const LocalEstimate est = estimate_step(f, rb, pose, evo, sensor);
    CHECK(est.belief.cov.trace() <= pr.cov.trace() + 1e-9);
    if (est.belief.cov.trace() < pr.cov.trace()) ++shrunk;
  }
  CHECK(shrunk == 100);
}

TEST_CASE("posterior stays symmetric PSD over a long episode") {
  const EvolutionModel evo = EvolutionModel::make(0.0, 0.5);
  SensorModel sensor;
  RngStream rng(123);
  GaussianBelief belief{Eigen::Vector4d(15, 15, 1, 0),
                        Eigen::Matrix4d::Identity()};
  AgentPose pose{{14.0, 14.0}, 0.3};
  for (int t = 0; t < 40; ++t) {
    Observation obs;
    if (t % 3 != 0) {
      const GaussianBelief pred = predict(belief, evo);
      const Eigen::Vector2d ideal = observe_ideal(pose, pred.mean, 0.0);
      obs = RangeBearing{ideal(0) + 0.2 * rng.normal(),
                         wrap_angle(ideal(1) + 0.01 * rng.normal())};
    }
    const LocalEstimate est =
        estimate_step(belief, obs, pose, evo, sensor, t == 0);
    belief = est.belief;
    CHECK((belief.cov - belief.cov.transpose()).cwiseAbs().maxCoeff() < 1e-9);
    CHECK_NOTHROW(cholesky_psd(belief.cov));
  }
}

TEST_CASE("bearing residual wraps across the seam") {
  SensorModel s;
  AgentPose pose;
  GaussianBelief pred{Eigen::Vector4d(-5, 0.05, 0, 0),
                      0.01 * Eigen::Matrix4d::Identity()};
  const Eigen::Vector2d ideal = observe_ideal(pose, pred.mean, 0.0);
  RangeBearing rb{ideal(0), wrap_angle(ideal(1) + 0.02)};
  const LocalEstimate est = update(pred, rb, pose, s);
  CHECK(std::abs(est.innovation(1)) == doctest::Approx(0.02).epsilon(1e-6));
}

TEST_CASE("linear filter matches a grid Bayes oracle") {
  // x' = 0.95 x + N(0, 0.3), y = x + N(0, 1)
  const double a = 0.95, q = 0.3, r = 1.0;
  Eigen::MatrixXd am(1, 1), qm(1, 1), hm(1, 1), rm(1, 1);
  am << a;
  qm << q;
  hm << 1.0;
  rm << r;

  GridFilter grid(-10.0, 10.0, 10000);
  grid.set_gaussian(0.0, 1.0);
  GaussianBelief kf = scalar(0.0, 1.0);

  RngStream rng(555);
  double truth = 0.3;
  for (int t = 0; t < 5; ++t) {
    truth = a * truth + std::sqrt(q) * rng.normal();
    const double y = truth + rng.normal();
    kf = kf_predict(kf, am, qm);
    grid.predict(a, q);
    Eigen::VectorXd innovation(1);
    innovation << y - kf.mean(0);
    kf = kf_update(kf, hm, rm, innovation).posterior;
    grid.update(y, r);
    CHECK(std::abs(kf.mean(0) - grid.mean()) < 1e-3);
  }
}
