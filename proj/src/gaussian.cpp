#include "lof/gaussian.hpp"

#include <cmath>

namespace lof {

namespace {

constexpr double kLogTwoPi = 1.8378770664093454836;

void require_same_dim(const GaussianBelief& a, const GaussianBelief& b) {
  if (a.dim() != b.dim()) {
    throw DimensionError("belief dimensions differ: " +
                         std::to_string(a.dim()) + " vs " +
                         std::to_string(b.dim()));
  }
}

double log_det_from_chol(const Eigen::MatrixXd& l) {
  double s = 0.0;
  for (int i = 0; i < l.rows(); ++i) s += std::log(l(i, i));
  return 2.0 * s;
}

}  // namespace

bool is_valid_belief(const GaussianBelief& b, double sym_tol) {
  if (b.cov.rows() != b.dim() || b.cov.cols() != b.dim()) return false;
  if (!b.mean.allFinite() || !b.cov.allFinite()) return false;
  if (((b.cov - b.cov.transpose()).cwiseAbs().maxCoeff()) > sym_tol) return false;
  try {
    cholesky_psd(b.cov);
  } catch (const SingularCovariance&) {
    return false;
  }
  return true;
}

static Eigen::MatrixXd cholesky_impl(const Eigen::MatrixXd& m, double jitter,
                                     bool allow_semidefinite) {
  const int n = static_cast<int>(m.rows());
  if (m.cols() != n) throw DimensionError("covariance must be square");
  Eigen::MatrixXd a = m;
  a.diagonal().array() += jitter;
  const double scale = std::max(1.0, a.diagonal().cwiseAbs().maxCoeff());
  const double tol = 1e-12 * scale;

  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n, n);
  for (int j = 0; j < n; ++j) {
    double d = a(j, j) - l.row(j).head(j).squaredNorm();
    if (d <= tol) {
      if (d < -tol || !allow_semidefinite) {
        throw SingularCovariance("covariance not positive definite");
      }
      // semidefinite direction: zero column
      continue;
    }
    l(j, j) = std::sqrt(d);
    for (int i = j + 1; i < n; ++i) {
      const double off =
          a(i, j) - l.row(i).head(j).dot(l.row(j).head(j));
      l(i, j) = off / l(j, j);
    }
  }
  return l;
}

Eigen::MatrixXd cholesky_psd(const Eigen::MatrixXd& m, double jitter) {
  return cholesky_impl(m, jitter, true);
}

Eigen::MatrixXd cholesky_spd(const Eigen::MatrixXd& m, double jitter) {
  return cholesky_impl(m, jitter, false);
}

double log_pdf(const Eigen::VectorXd& x, const GaussianBelief& b,
               double jitter) {
  if (x.size() != b.mean.size()) {
    throw DimensionError("point dimension does not match belief");
  }
  const Eigen::MatrixXd l = cholesky_spd(b.cov, jitter);
  const Eigen::VectorXd z =
      l.triangularView<Eigen::Lower>().solve(x - b.mean);
  const double m = static_cast<double>(b.dim());
  return -0.5 * (m * kLogTwoPi + log_det_from_chol(l) + z.squaredNorm());
}

double pdf(const Eigen::VectorXd& x, const GaussianBelief& b, double jitter) {
  return std::exp(log_pdf(x, b, jitter));
}

double mahalanobis(const Eigen::VectorXd& d, const Eigen::MatrixXd& cov,
                   double jitter) {
  if (d.size() != cov.rows()) {
    throw DimensionError("vector dimension does not match covariance");
  }
  const Eigen::MatrixXd l = cholesky_spd(cov, jitter);
  return l.triangularView<Eigen::Lower>().solve(d).norm();
}

Eigen::VectorXd sample(const GaussianBelief& b, RngStream& rng, double jitter) {
  const Eigen::MatrixXd l = cholesky_psd(b.cov, jitter);
  Eigen::VectorXd z(b.dim());
  for (int i = 0; i < b.dim(); ++i) z(i) = rng.normal();
  return b.mean + l * z;
}

double kl_divergence(const GaussianBelief& a, const GaussianBelief& b) {
  require_same_dim(a, b);
  const int m = a.dim();
  const Eigen::MatrixXd la = cholesky_spd(a.cov);
  const Eigen::MatrixXd lb = cholesky_spd(b.cov);
  // tr(Sb^-1 Sa) via the factors: squared norm of Lb^-1 La
  const Eigen::MatrixXd w = lb.triangularView<Eigen::Lower>().solve(la);
  const double trace_term = w.squaredNorm();
  const Eigen::VectorXd z =
      lb.triangularView<Eigen::Lower>().solve(b.mean - a.mean);
  return 0.5 * (trace_term + z.squaredNorm() - m + log_det_from_chol(lb) -
                log_det_from_chol(la));
}

double js_divergence_moment_matched(const GaussianBelief& a,
                                    const GaussianBelief& b) {
  require_same_dim(a, b);
  const Eigen::VectorXd mm = 0.5 * (a.mean + b.mean);
  const Eigen::VectorXd da = a.mean - mm;
  const Eigen::VectorXd db = b.mean - mm;
  Eigen::MatrixXd cm = 0.5 * (a.cov + da * da.transpose()) +
                       0.5 * (b.cov + db * db.transpose());
  cm = 0.5 * (cm + cm.transpose()).eval();
  const GaussianBelief mixture{mm, cm};
  return 0.5 * kl_divergence(a, mixture) + 0.5 * kl_divergence(b, mixture);
}

double js_divergence_monte_carlo(const GaussianBelief& a,
                                 const GaussianBelief& b, int n,
                                 std::uint64_t seed) {
  require_same_dim(a, b);
  if (n <= 0) throw NonPositive("monte carlo sample count must be positive");
  RngStream rng(seed);
  const double log_half = std::log(0.5);
  const auto log_mixture = [&](double la, double lb) {
    const double hi = std::max(la, lb);
    const double lo = std::min(la, lb);
    return log_half + hi + std::log1p(std::exp(lo - hi));
  };
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd xa = sample(a, rng);
    const double la = log_pdf(xa, a);
    const double lb = log_pdf(xa, b);
    acc += 0.5 * (la - log_mixture(la, lb));
  }
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd xb = sample(b, rng);
    const double la = log_pdf(xb, a);
    const double lb = log_pdf(xb, b);
    acc += 0.5 * (lb - log_mixture(la, lb));
  }
  return acc / static_cast<double>(n);
}

double js_divergence_symmetrized_kl(const GaussianBelief& a,
                                    const GaussianBelief& b) {
  return 0.5 * kl_divergence(a, b) + 0.5 * kl_divergence(b, a);
}

double js_divergence(const GaussianBelief& a, const GaussianBelief& b,
                     const JsdSpec& spec) {
  switch (spec.method) {
    case JsdMethod::kMomentMatched:
      return js_divergence_moment_matched(a, b);
    case JsdMethod::kMonteCarlo:
      return js_divergence_monte_carlo(a, b, spec.mc_samples, spec.mc_seed);
    case JsdMethod::kSymmetrizedKl:
      return js_divergence_symmetrized_kl(a, b);
  }
  throw Error("unknown jsd method");
}

}  // namespace lof
