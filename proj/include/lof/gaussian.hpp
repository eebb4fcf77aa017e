#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "lof/common.hpp"
#include "lof/rng.hpp"

namespace lof {

/// Gaussian state belief N(mean, cov). The covariance is expected to be
/// symmetric to 1e-9 and positive semi-definite after the standard jitter.
struct GaussianBelief {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;

  GaussianBelief() = default;
  GaussianBelief(Eigen::VectorXd m, Eigen::MatrixXd c)
      : mean(std::move(m)), cov(std::move(c)) {}

  int dim() const { return static_cast<int>(mean.size()); }

  static GaussianBelief isotropic(const Eigen::VectorXd& mean, double var) {
    return {mean, var * Eigen::MatrixXd::Identity(mean.size(), mean.size())};
  }
};

bool is_valid_belief(const GaussianBelief& b, double sym_tol = 1e-9);

/// Lower Cholesky factor of (m + jitter*I). Zero pivots are tolerated
/// (the corresponding column of L is zeroed); a clearly negative pivot
/// throws SingularCovariance.
Eigen::MatrixXd cholesky_psd(const Eigen::MatrixXd& m, double jitter = kCovJitter);

/// Lower Cholesky factor of (m + jitter*I), requiring strictly positive
/// pivots. Throws SingularCovariance otherwise.
Eigen::MatrixXd cholesky_spd(const Eigen::MatrixXd& m, double jitter = kCovJitter);

/// Gaussian density of x under b.
double pdf(const Eigen::VectorXd& x, const GaussianBelief& b,
           double jitter = kCovJitter);

/// ln pdf(x, b), stable for densities far below the double range of pdf.
double log_pdf(const Eigen::VectorXd& x, const GaussianBelief& b,
               double jitter = kCovJitter);

/// sqrt(d^T cov^-1 d) via triangular solves against the Cholesky factor.
double mahalanobis(const Eigen::VectorXd& d, const Eigen::MatrixXd& cov,
                   double jitter = kCovJitter);

/// Draw mean + L z with z standard normal; deterministic given the stream.
Eigen::VectorXd sample(const GaussianBelief& b, RngStream& rng,
                       double jitter = kCovJitter);

/// KL(a || b) between Gaussians, closed form.
double kl_divergence(const GaussianBelief& a, const GaussianBelief& b);

enum class JsdMethod {
  /// 0.5 KL(a||M~) + 0.5 KL(b||M~) with M~ the Gaussian moment-matched to
  /// the equal-weight mixture. Deterministic; can exceed ln 2.
  kMomentMatched,
  /// Seeded sample estimate of 0.5 KL(a||M) + 0.5 KL(b||M) against the
  /// true mixture; bounded by ln 2 up to estimator noise.
  kMonteCarlo,
  /// 0.5 KL(a||b) + 0.5 KL(b||a), closed form. Grows quadratically with
  /// mean separation, which is what the fusion distances need to make the
  /// medoid selective at the default temperature.
  kSymmetrizedKl,
};

struct JsdSpec {
  JsdMethod method = JsdMethod::kSymmetrizedKl;
  int mc_samples = 100000;
  std::uint64_t mc_seed = 0;
};

double js_divergence(const GaussianBelief& a, const GaussianBelief& b,
                     const JsdSpec& spec);

double js_divergence_moment_matched(const GaussianBelief& a,
                                    const GaussianBelief& b);

double js_divergence_monte_carlo(const GaussianBelief& a,
                                 const GaussianBelief& b, int n,
                                 std::uint64_t seed);

double js_divergence_symmetrized_kl(const GaussianBelief& a,
                                    const GaussianBelief& b);

}  // namespace lof
