#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "lof/gaussian.hpp"

using namespace lof;

namespace {

GaussianBelief standard(int dim) {
  return {Eigen::VectorXd::Zero(dim), Eigen::MatrixXd::Identity(dim, dim)};
}

GaussianBelief scalar(double mean, double var) {
  Eigen::VectorXd m(1);
  m << mean;
  Eigen::MatrixXd c(1, 1);
  c << var;
  return {m, c};
}

}  // namespace

TEST_CASE("pdf known values") {
  Eigen::VectorXd x0(1);
  x0 << 0.0;
  CHECK(pdf(x0, scalar(0.0, 1.0)) == doctest::Approx(0.3989422804).epsilon(1e-9));

  CHECK(pdf(Eigen::Vector2d(0, 0), standard(2)) ==
        doctest::Approx(0.1591549431).epsilon(1e-9));

  GaussianBelief wide{Eigen::Vector2d::Zero(),
                      4.0 * Eigen::Matrix2d::Identity()};
  // hand evaluation 1/(2*pi*sqrt(16))
  CHECK(pdf(Eigen::Vector2d(0, 0), wide) ==
        doctest::Approx(0.0397887358).epsilon(1e-8));
  // scalar numeric cross-check: product of two independent 1-D densities
  const double scalar_oracle =
      pdf(x0, scalar(0.0, 4.0)) * pdf(x0, scalar(0.0, 4.0));
  CHECK(pdf(Eigen::Vector2d(0, 0), wide) ==
        doctest::Approx(scalar_oracle).epsilon(1e-12));
}

TEST_CASE("log_pdf known values and consistency") {
  Eigen::VectorXd x(1);
  x << 0.0;
  CHECK(log_pdf(x, scalar(0, 1)) == doctest::Approx(-0.9189385332).epsilon(1e-9));
  x << 1.0;
  CHECK(log_pdf(x, scalar(0, 1)) == doctest::Approx(-1.4189385332).epsilon(1e-9));
  CHECK(log_pdf(Eigen::Vector2d(3, 4), standard(2)) ==
        doctest::Approx(-14.3378770664).epsilon(1e-9));

  RngStream rng(7);
  for (int k = 0; k < 50; ++k) {
    Eigen::Vector2d p(rng.normal(), rng.normal());
    GaussianBelief b{Eigen::Vector2d(rng.normal(), rng.normal()),
                     Eigen::Matrix2d::Identity() * rng.uniform(0.5, 3.0)};
    const double d = pdf(p, b);
    if (d > 1e-300) {
      CHECK(std::exp(log_pdf(p, b)) == doctest::Approx(d).epsilon(1e-9));
    }
  }
}

TEST_CASE("pdf integrates to one on a 1-D grid") {
  const GaussianBelief b = scalar(0.3, 2.0);
  const double sigma = std::sqrt(2.0);
  const int n = 200000;
  const double lo = 0.3 - 8 * sigma, hi = 0.3 + 8 * sigma;
  const double h = (hi - lo) / n;
  double acc = 0.0;
  Eigen::VectorXd x(1);
  for (int i = 0; i <= n; ++i) {
    x(0) = lo + h * i;
    const double w = (i == 0 || i == n) ? 0.5 : 1.0;
    acc += w * pdf(x, b);
  }
  CHECK(acc * h == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("mahalanobis known values") {
  CHECK(mahalanobis(Eigen::Vector2d(2, 0), Eigen::Matrix2d::Identity(), 0.0) ==
        doctest::Approx(2.0).epsilon(1e-12));
  CHECK(mahalanobis(Eigen::Vector2d(0, 0), Eigen::Matrix2d::Identity()) ==
        doctest::Approx(0.0));
  Eigen::Matrix2d diag = Eigen::Vector2d(1, 4).asDiagonal();
  CHECK(mahalanobis(Eigen::Vector2d(1, 1), diag) ==
        doctest::Approx(1.1180339887).epsilon(1e-9));
  // oracle: direct inverse formula
  const Eigen::Vector2d d(0.7, -1.3);
  Eigen::Matrix2d c;
  c << 2.0, 0.3, 0.3, 1.5;
  const double direct = std::sqrt(d.dot(c.inverse() * d));
  CHECK(mahalanobis(d, c) == doctest::Approx(direct).epsilon(1e-9));
}

TEST_CASE("mahalanobis under identity equals the euclidean norm") {
  RngStream rng(3);
  for (int k = 0; k < 100; ++k) {
    Eigen::Vector3d d(rng.normal(), rng.normal(), rng.normal());
    CHECK(mahalanobis(d, Eigen::Matrix3d::Identity(), 0.0) ==
          doctest::Approx(d.norm()).epsilon(1e-12));
  }
}

TEST_CASE("mahalanobis rejects indefinite input") {
  Eigen::Matrix2d bad;
  bad << 1.0, 0.0, 0.0, -1.0;
  CHECK_THROWS_AS(mahalanobis(Eigen::Vector2d(1, 1), bad), SingularCovariance);
}

TEST_CASE("sample determinism and degenerate covariance") {
  const GaussianBelief b = standard(3);
  RngStream a(42), c(42);
  const Eigen::VectorXd xa = sample(b, a);
  const Eigen::VectorXd xc = sample(b, c);
  CHECK((xa - xc).norm() == 0.0);

  // zero covariance with jitter disabled collapses to the mean
  GaussianBelief point{Eigen::Vector2d(1.5, -2.0), Eigen::Matrix2d::Zero()};
  RngStream r(1);
  const Eigen::VectorXd x = sample(point, r, 0.0);
  CHECK(x(0) == 1.5);
  CHECK(x(1) == -2.0);
}

TEST_CASE("sample mean matches the distribution") {
  RngStream rng(2024);
  const GaussianBelief b = scalar(0.0, 1.0);
  double acc = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) acc += sample(b, rng)(0);
  const double mean = acc / n;
  CHECK(mean > -0.02);
  CHECK(mean < 0.02);
}

TEST_CASE("js divergence of identical beliefs is zero") {
  const GaussianBelief a = scalar(0.7, 1.3);
  CHECK(js_divergence_moment_matched(a, a) == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(js_divergence_symmetrized_kl(a, a) == doctest::Approx(0.0).epsilon(1e-9));
  const double mc = js_divergence_monte_carlo(a, a, 20000, 5);
  CHECK(std::abs(mc) < 1e-9);  // integrand is exactly zero pointwise
}

TEST_CASE("js divergence is symmetric") {
  RngStream rng(11);
  for (int k = 0; k < 20; ++k) {
    const GaussianBelief a = scalar(rng.normal(), rng.uniform(0.3, 2.0));
    const GaussianBelief b = scalar(rng.normal(), rng.uniform(0.3, 2.0));
    CHECK(js_divergence_moment_matched(a, b) ==
          doctest::Approx(js_divergence_moment_matched(b, a)).epsilon(1e-12));
    CHECK(js_divergence_symmetrized_kl(a, b) ==
          doctest::Approx(js_divergence_symmetrized_kl(b, a)).epsilon(1e-12));
  }
}

TEST_CASE("monte carlo js saturates at ln 2 for far-apart beliefs") {
  const GaussianBelief a = scalar(0.0, 1.0);
  const GaussianBelief b = scalar(8.0, 1.0);
  const double v = js_divergence_monte_carlo(a, b, 1000000, 99);
  CHECK(v == doctest::Approx(std::log(2.0)).epsilon(0.02));
}

TEST_CASE("monte carlo js is reproducible for a fixed seed") {
  const GaussianBelief a = scalar(0.0, 1.0);
  const GaussianBelief b = scalar(1.0, 2.0);
  const double v1 = js_divergence_monte_carlo(a, b, 5000, 31);
  const double v2 = js_divergence_monte_carlo(a, b, 5000, 31);
  CHECK(v1 == v2);
}

TEST_CASE("moment matched js may exceed ln 2 and stays nonnegative") {
  const GaussianBelief a = scalar(0.0, 1.0);
  const GaussianBelief b = scalar(50.0, 1.0);
  const double v = js_divergence_moment_matched(a, b);
  CHECK(v > std::log(2.0));
  RngStream rng(17);
  for (int k = 0; k < 20; ++k) {
    const GaussianBelief p = scalar(rng.normal(), rng.uniform(0.2, 3.0));
    const GaussianBelief q = scalar(rng.normal(), rng.uniform(0.2, 3.0));
    CHECK(js_divergence_moment_matched(p, q) >= -1e-12);
  }
}

TEST_CASE("symmetrized kl grows quadratically with separation") {
  const GaussianBelief a = standard(4);
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(4);
  mu(0) = 50.0;
  const GaussianBelief b{mu, Eigen::MatrixXd::Identity(4, 4)};
  CHECK(js_divergence_symmetrized_kl(a, b) ==
        doctest::Approx(1250.0).epsilon(1e-6));
}

TEST_CASE("dimension mismatch raises") {
  CHECK_THROWS_AS(js_divergence_moment_matched(scalar(0, 1), standard(2)),
                  DimensionError);
}

TEST_CASE("belief validity check") {
  CHECK(is_valid_belief(standard(4)));
  GaussianBelief bad = standard(2);
  bad.cov(0, 1) = 0.5;  // asymmetric
  CHECK_FALSE(is_valid_belief(bad));
}
