#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "lof/fusion.hpp"
#include "lof/rng.hpp"

using namespace lof;

namespace {

GaussianBelief nd(const Eigen::VectorXd& mean, double var) {
  return GaussianBelief::isotropic(mean, var);
}

std::vector<GaussianBelief> outlier_scene(RngStream& rng, double offset) {
  std::vector<GaussianBelief> est;
  for (int i = 0; i < 3; ++i) {
    Eigen::VectorXd m(4);
    for (int k = 0; k < 4; ++k) m(k) = 0.3 * rng.normal();
    est.push_back(nd(m, 1.0));
  }
  Eigen::VectorXd dir(4);
  for (int k = 0; k < 4; ++k) dir(k) = rng.normal();
  dir.normalize();
  est.push_back(nd(offset * dir, 1.0));
  return est;
}

}  // namespace

TEST_CASE("weight normalization") {
  Eigen::VectorXd w(4);
  w << 1, 1, 1, 1;
  CHECK((normalize_weights(w) -
         Eigen::VectorXd::Constant(4, 0.25)).norm() == 0.0);

  Eigen::VectorXd v(2);
  v << 3, 1;
  const Eigen::VectorXd n = normalize_weights(v);
  CHECK(n(0) == doctest::Approx(0.75));
  CHECK(n(1) == doctest::Approx(0.25));

  Eigen::VectorXd z = Eigen::VectorXd::Zero(3);
  const Eigen::VectorXd u = normalize_weights(z);
  CHECK(u(0) == doctest::Approx(1.0 / 3));

  Eigen::VectorXd bad(2);
  bad << 0.5, -0.1;
  CHECK_THROWS_AS(normalize_weights(bad), NegativeWeight);

  RngStream rng(1);
  for (int k = 0; k < 200; ++k) {
    Eigen::VectorXd r(5);
    for (int i = 0; i < 5; ++i) r(i) = rng.uniform(0, 10);
    CHECK(normalize_weights(r).sum() == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("mixture moments") {
  std::vector<GaussianBelief> pair;
  Eigen::VectorXd m0(1), m2(1);
  m0 << 0.0;
  m2 << 2.0;
  pair.push_back(nd(m0, 1.0));
  pair.push_back(nd(m2, 1.0));
  Eigen::VectorXd half(2);
  half << 0.5, 0.5;
  const GaussianBelief mixed = mixture_moments(pair, half);
  CHECK(mixed.mean(0) == doctest::Approx(1.0));
  CHECK(mixed.cov(0, 0) == doctest::Approx(2.0));

  Eigen::VectorXd onehot(2);
  onehot << 1.0, 0.0;
  const GaussianBelief first = mixture_moments(pair, onehot);
  CHECK(first.mean(0) == doctest::Approx(0.0));
  CHECK(first.cov(0, 0) == doctest::Approx(1.0));

  std::vector<GaussianBelief> same{pair[0], pair[0], pair[0]};
  const GaussianBelief id =
      mixture_moments(same, Eigen::VectorXd::Constant(3, 1.0 / 3));
  CHECK(id.mean(0) == doctest::Approx(0.0));
  CHECK(id.cov(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("mixture covariance stays PSD on random inputs") {
  RngStream rng(44);
  for (int k = 0; k < 10000; ++k) {
    std::vector<GaussianBelief> est;
    const int n = rng.uniform_int(1, 5);
    for (int i = 0; i < n; ++i) {
      Eigen::VectorXd m(2);
      m << rng.normal() * 5, rng.normal() * 5;
      est.push_back(nd(m, rng.uniform(0.01, 4.0)));
    }
    Eigen::VectorXd w(n);
    for (int i = 0; i < n; ++i) w(i) = rng.uniform(0, 1);
    const GaussianBelief mixed = mixture_moments(est, normalize_weights(w));
    CHECK_NOTHROW(cholesky_psd(mixed.cov));
  }
}

TEST_CASE("soft medoid limits") {
  // high temperature: uniform coefficients
  Eigen::VectorXd w(3);
  w << 0.2, 0.5, 0.3;
  Eigen::MatrixXd d(3, 3);
  d << 0, 1, 10, 1, 0, 9, 10, 9, 0;
  const Eigen::VectorXd hi = soft_medoid_coeffs(w, d, 1e9);
  for (int i = 0; i < 3; ++i)
    CHECK(hi(i) == doctest::Approx(1.0 / 3).epsilon(1e-6));

  // low temperature: one-hot on the weighted medoid (points 0, 1, 10)
  const Eigen::VectorXd eq = Eigen::VectorXd::Constant(3, 1.0);
  const Eigen::VectorXd lo = soft_medoid_coeffs(eq, d, 1e-9);
  CHECK(lo(0) == doctest::Approx(0.0));
  CHECK(lo(1) == doctest::Approx(1.0));
  CHECK(lo(2) == doctest::Approx(0.0));

  // single member
  Eigen::VectorXd one(1);
  one << 1.0;
  Eigen::MatrixXd d1 = Eigen::MatrixXd::Zero(1, 1);
  CHECK(soft_medoid_coeffs(one, d1, 1.0)(0) == doctest::Approx(1.0));
}

TEST_CASE("soft medoid selects the brute-force medoid at low temperature") {
  RngStream rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 5;
    std::vector<double> pts(n);
    for (auto& p : pts) p = rng.uniform(-10, 10);
    Eigen::VectorXd w(n);
    for (int i = 0; i < n; ++i) w(i) = rng.uniform(0.1, 2.0);
    Eigen::MatrixXd d(n, n);
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < n; ++k) d(i, k) = std::abs(pts[i] - pts[k]);

    int best = 0;
    double best_sum = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
      const double s = d.row(i).transpose().dot(w);
      if (s < best_sum) {
        best_sum = s;
        best = i;
      }
    }
    const Eigen::VectorXd r = soft_medoid_coeffs(w, d, 1e-9);
    int argmax = 0;
    r.maxCoeff(&argmax);
    CHECK(argmax == best);
    CHECK(r(best) == doctest::Approx(1.0));
  }
}

TEST_CASE("soft medoid coefficients are shift invariant") {
  RngStream rng(9);
  Eigen::VectorXd w(4);
  for (int i = 0; i < 4; ++i) w(i) = rng.uniform(0.1, 1.0);
  Eigen::MatrixXd d(4, 4);
  for (int i = 0; i < 4; ++i)
    for (int k = 0; k < 4; ++k) d(i, k) = i == k ? 0.0 : rng.uniform(0.5, 5.0);
  d = 0.5 * (d + d.transpose()).eval();
  const Eigen::VectorXd base = soft_medoid_coeffs(w, d, 2.0);
  // adding a constant to every row sum shifts all scores equally
  const double c = 7.3 / w.sum();
  Eigen::MatrixXd shifted = d.array() + c;
  for (int i = 0; i < 4; ++i) shifted(i, i) = d(i, i) + c;
  const Eigen::VectorXd moved = soft_medoid_coeffs(w, shifted, 2.0);
  CHECK((base - moved).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("distance state update follows the decay factor") {
  const int n = 3;
  RngStream rng(3);
  std::vector<GaussianBelief> est1, est2;
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd m(2);
    m << rng.normal(), rng.normal();
    est1.push_back(nd(m, 1.0));
    m << rng.normal() * 2, rng.normal() * 2;
    est2.push_back(nd(m, 1.5));
  }
  const JsdSpec jsd;

  TsmState s0 = TsmState::init(n);
  const TsmState s1 = tsm_update(s0, est1, 1e-3, jsd);
  // first step adopts the fresh divergences wholesale
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k)
      CHECK(s1.d(i, k) ==
            doctest::Approx(i == k ? 0.0
                                   : js_divergence_symmetrized_kl(est1[i],
                                                                  est1[k])));

  // accumulator at zero: the next distance is the midpoint
  const TsmState s2 = tsm_update(s1, est2, 1e-3, jsd);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k) {
      const double j2 =
          i == k ? 0.0 : js_divergence_symmetrized_kl(est2[i], est2[k]);
      CHECK(s2.d(i, k) == doctest::Approx(0.5 * (s1.d(i, k) + j2)));
    }

  // forced decay factor of one adopts the fresh divergences
  TsmState pinned = s1;
  pinned.tau_hat.setConstant(std::numeric_limits<double>::infinity());
  const TsmState forced1 = tsm_update(pinned, est2, 1e-3, jsd);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k) {
      const double j2 =
          i == k ? 0.0 : js_divergence_symmetrized_kl(est2[i], est2[k]);
      CHECK(forced1.d(i, k) == doctest::Approx(j2));
    }

  // forced decay factor of zero freezes the previous distances
  pinned.tau_hat.setConstant(-std::numeric_limits<double>::infinity());
  const TsmState forced0 = tsm_update(pinned, est2, 1e-3, jsd);
  CHECK((forced0.d - s1.d).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("smoothed distances stay between old and new") {
  RngStream rng(15);
  const JsdSpec jsd;
  TsmState s = TsmState::init(4);
  std::vector<GaussianBelief> est;
  for (int i = 0; i < 4; ++i) {
    Eigen::VectorXd m(2);
    m << rng.normal(), rng.normal();
    est.push_back(nd(m, 1.0));
  }
  s = tsm_update(s, est, 1e-3, jsd);
  for (int t = 0; t < 10; ++t) {
    std::vector<GaussianBelief> fresh;
    for (int i = 0; i < 4; ++i) {
      Eigen::VectorXd m(2);
      m << rng.normal() * (1 + t), rng.normal();
      fresh.push_back(nd(m, rng.uniform(0.3, 2.0)));
    }
    Eigen::MatrixXd j(4, 4);
    for (int i = 0; i < 4; ++i)
      for (int k = 0; k < 4; ++k)
        j(i, k) =
            i == k ? 0.0 : js_divergence_symmetrized_kl(fresh[i], fresh[k]);
    const TsmState next = tsm_update(s, fresh, 1e-3, jsd);
    for (int i = 0; i < 4; ++i)
      for (int k = 0; k < 4; ++k) {
        const double lo = std::min(s.d(i, k), j(i, k)) - 1e-12;
        const double hi = std::max(s.d(i, k), j(i, k)) + 1e-12;
        CHECK(next.d(i, k) >= lo);
        CHECK(next.d(i, k) <= hi);
      }
    s = next;
  }
}

TEST_CASE("robust fusion basics") {
  const JsdSpec jsd;
  // single agent: the local estimate passes through
  Eigen::VectorXd m(2);
  m << 1.0, -2.0;
  std::vector<GaussianBelief> single{nd(m, 0.7)};
  Eigen::VectorXd w1(1);
  w1 << 3.0;
  const RobustFuseResult r1 =
      robust_fuse(single, w1, TsmState::init(1), 100.0, 1e-3, jsd);
  CHECK((r1.record.fused.mean - m).norm() == doctest::Approx(0.0));
  CHECK(r1.record.fusion_weights(0) == doctest::Approx(1.0));

  // identical estimates fuse to themselves
  std::vector<GaussianBelief> same{nd(m, 0.7), nd(m, 0.7), nd(m, 0.7)};
  Eigen::VectorXd w3(3);
  w3 << 0.1, 5.0, 2.0;
  const RobustFuseResult r3 =
      robust_fuse(same, w3, TsmState::init(3), 100.0, 1e-3, jsd);
  CHECK((r3.record.fused.mean - m).norm() < 1e-12);
  CHECK((r3.record.fused.cov(0, 0)) == doctest::Approx(0.7));
}

TEST_CASE("gross outliers barely move the robust fusion") {
  RngStream rng(88);
  const JsdSpec jsd;
  int robust_ok = 0, plain_far = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::vector<GaussianBelief> est = outlier_scene(rng, 50.0);
    Eigen::VectorXd w(4);
    for (int i = 0; i < 4; ++i) w(i) = rng.uniform(0.8, 1.2);

    const RobustFuseResult robust =
        robust_fuse(est, w, TsmState::init(4), 100.0, 1e-3, jsd);
    const GaussianBelief plain = mixture_moments(est, normalize_weights(w));

    if (robust.record.fused.mean.norm() < 1.0) ++robust_ok;
    if (plain.mean.norm() > 5.0) ++plain_far;
  }
  CHECK(robust_ok == 100);
  CHECK(plain_far == 100);
}

TEST_CASE("high temperature with uniform distances equals plain fusion") {
  RngStream rng(5);
  const JsdSpec jsd;
  std::vector<GaussianBelief> est;
  for (int i = 0; i < 4; ++i) {
    Eigen::VectorXd m(3);
    m << rng.normal(), rng.normal(), rng.normal();
    est.push_back(nd(m, rng.uniform(0.2, 1.5)));
  }
  Eigen::VectorXd w(4);
  for (int i = 0; i < 4; ++i) w(i) = rng.uniform(0.1, 1.0);

  const RobustFuseResult robust =
      robust_fuse(est, w, TsmState::init(4), 1e9, 1e-3, jsd);
  const GaussianBelief plain = mixture_moments(est, normalize_weights(w));
  CHECK((robust.record.fused.mean - plain.mean).cwiseAbs().maxCoeff() < 1e-6);
  CHECK((robust.record.fused.cov - plain.cov).cwiseAbs().maxCoeff() < 1e-6);
}
