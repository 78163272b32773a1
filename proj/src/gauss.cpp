#include "prfmpc/gauss.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "prfmpc/errors.hpp"

namespace prfmpc {

double RandomStream::normal() {
  if (has_cached_) {
    has_cached_ = false;
    return cached_;
  }
  double u1 = uniform();
  const double u2 = uniform();
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * M_PI * u2;
  cached_ = radius * std::sin(angle);
  has_cached_ = true;
  return radius * std::cos(angle);
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ull * (index + 1);
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ull;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBull;
  z ^= z >> 31;
  return z;
}

}  // namespace prfmpc

namespace prfmpc::gauss {

namespace {

constexpr double kSymmetryTol = 1e-12;
constexpr double kPsdFloor = -1e-10;
constexpr double kRegularizeBelow = 1e-12;

void validate_covariance(const Eigen::MatrixXd& cov, const char* context) {
  if (cov.rows() != cov.cols()) {
    throw std::invalid_argument(std::string(context) +
                                ": covariance is not square");
  }
  const double asym = (cov - cov.transpose()).cwiseAbs().maxCoeff();
  if (asym > kSymmetryTol) {
    throw std::invalid_argument(std::string(context) +
                                ": covariance asymmetry " +
                                std::to_string(asym) + " exceeds 1e-12");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov,
                                                    Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) {
    throw std::runtime_error(std::string(context) +
                             ": eigendecomposition failed");
  }
  const double min_eig = es.eigenvalues().minCoeff();
  const double scale = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
  if (min_eig < kPsdFloor * scale) {
    throw std::invalid_argument(std::string(context) +
                                ": covariance is not positive semidefinite "
                                "(min eigenvalue " +
                                std::to_string(min_eig) + ")");
  }
}

double sym2_min_eigenvalue(const Eigen::Matrix2d& s) {
  const double half_trace = 0.5 * (s(0, 0) + s(1, 1));
  const double half_gap = 0.5 * (s(0, 0) - s(1, 1));
  const double off = 0.5 * (s(0, 1) + s(1, 0));
  return half_trace - std::sqrt(half_gap * half_gap + off * off);
}

/// Closed-form inverse of the 2x2 conditioning block, regularizing a barely
/// positive block by 1e-12*I and rejecting a singular one.
Eigen::Matrix2d invert_conditioning_block(Eigen::Matrix2d s, int step) {
  const double min_eig = sym2_min_eigenvalue(s);
  if (min_eig <= 0.0) {
    throw SingularCovarianceError(
        "conditioning covariance at step " + std::to_string(step) +
        " is singular (min eigenvalue " + std::to_string(min_eig) + ")");
  }
  if (min_eig <= kRegularizeBelow) {
    s += kRegularizeBelow * Eigen::Matrix2d::Identity();
  }
  const double det = s(0, 0) * s(1, 1) - s(0, 1) * s(1, 0);
  Eigen::Matrix2d inv;
  inv << s(1, 1), -s(0, 1), -s(1, 0), s(0, 0);
  return inv / det;
}

Eigen::MatrixXd symmetrized(const Eigen::MatrixXd& m) {
  return 0.5 * (m + m.transpose());
}

}  // namespace

Gaussian::Gaussian(Eigen::VectorXd mean_in, Eigen::MatrixXd cov_in)
    : mean(std::move(mean_in)), cov(std::move(cov_in)) {
  if (mean.size() != cov.rows()) {
    throw std::invalid_argument("Gaussian: mean dimension " +
                                std::to_string(mean.size()) +
                                " does not match covariance dimension " +
                                std::to_string(cov.rows()));
  }
  validate_covariance(cov, "Gaussian");
  cov = symmetrized(cov);
}

JointGaussianTrajectory::JointGaussianTrajectory(int origin_step, int horizon,
                                                 Eigen::VectorXd mean,
                                                 Eigen::MatrixXd cov)
    : origin_step_(origin_step),
      horizon_(horizon),
      mean_(std::move(mean)),
      cov_(std::move(cov)) {
  if (horizon_ <= origin_step_) {
    throw std::invalid_argument(
        "JointGaussianTrajectory: horizon must exceed origin step");
  }
  const Eigen::Index expected = 2 * static_cast<Eigen::Index>(steps());
  if (mean_.size() != expected || cov_.rows() != expected) {
    throw std::invalid_argument(
        "JointGaussianTrajectory: stacked dimensions do not match horizon");
  }
  validate_covariance(cov_, "JointGaussianTrajectory");
  cov_ = symmetrized(cov_);
}

int JointGaussianTrajectory::block_index(int t) const {
  if (t <= origin_step_ || t > horizon_) {
    throw std::invalid_argument("JointGaussianTrajectory: timestep " +
                                std::to_string(t) + " outside (" +
                                std::to_string(origin_step_) + ", " +
                                std::to_string(horizon_) + "]");
  }
  return t - origin_step_ - 1;
}

Eigen::Vector2d JointGaussianTrajectory::mean(int t) const {
  return mean_.segment<2>(2 * block_index(t));
}

Eigen::Matrix2d JointGaussianTrajectory::cov(int t) const {
  const int i = block_index(t);
  return cov_.block<2, 2>(2 * i, 2 * i);
}

Eigen::Matrix2d JointGaussianTrajectory::cross(int t1, int t2) const {
  return cov_.block<2, 2>(2 * block_index(t1), 2 * block_index(t2));
}

double std_normal_cdf(double z) {
  return 0.5 * std::erfc(-z * M_SQRT1_2);
}

namespace {

// Rational approximation of the inverse normal CDF for p in (0, 0.5].
double quantile_initial_guess(double p) {
  static constexpr double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                  -2.759285104469687e+02, 1.383577518672690e+02,
                                  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                  -1.556989798598866e+02, 6.680131188771972e+01,
                                  -1.328068155288572e+01};
  static constexpr double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                  -2.400758277161838e+00, -2.549732539343734e+00,
                                  4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                                  2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q +
            c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double q = p - 0.5;
  const double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r +
          a[5]) *
         q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

}  // namespace

double std_normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw std::domain_error("std_normal_quantile: p must lie in (0, 1), got " +
                            std::to_string(p));
  }
  const bool upper = p > 0.5;
  const double pl = upper ? 1.0 - p : p;
  double x = quantile_initial_guess(pl);
  // One Halley step against the erfc-based CDF. Skipped only where
  // exp(x^2/2) would overflow, far outside the contracted domain.
  if (0.5 * x * x < 700.0) {
    const double err = std_normal_cdf(x) - pl;
    const double u = err * std::sqrt(2.0 * M_PI) * std::exp(0.5 * x * x);
    x -= u / (1.0 + 0.5 * x * u);
  }
  return upper ? -x : x;
}

Gaussian condition(const JointGaussianTrajectory& joint, int t, int a,
                   const Eigen::Vector2d& value) {
  const int tau = joint.origin_step();
  if (a < 1 || tau + a >= t || t > joint.horizon()) {
    throw std::invalid_argument(
        "condition: requires origin < origin+a < t <= horizon");
  }
  const int cond_step = tau + a;
  const Eigen::Matrix2d inv = invert_conditioning_block(joint.cov(cond_step),
                                                        cond_step);
  const Eigen::Matrix2d gain = joint.cross(t, cond_step) * inv;
  const Eigen::Vector2d mean =
      joint.mean(t) + gain * (value - joint.mean(cond_step));
  const Eigen::Matrix2d cov =
      symmetrized(joint.cov(t) - gain * joint.cross(cond_step, t));
  return Gaussian(mean, cov);
}

Gaussian conditional_mean_distribution(const JointGaussianTrajectory& joint,
                                       int t, int a) {
  const int tau = joint.origin_step();
  if (a < 1 || tau + a >= t || t > joint.horizon()) {
    throw std::invalid_argument(
        "conditional_mean_distribution: requires origin < origin+a < t <= "
        "horizon");
  }
  const int cond_step = tau + a;
  const Eigen::Matrix2d inv = invert_conditioning_block(joint.cov(cond_step),
                                                        cond_step);
  const Eigen::Matrix2d cov = symmetrized(
      joint.cross(t, cond_step) * inv * joint.cross(cond_step, t));
  return Gaussian(joint.mean(t), cov);
}

Eigen::Matrix2d psd_pseudo_inverse(const Eigen::Matrix2d& s) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(s);
  const Eigen::Vector2d eigs = es.eigenvalues();
  const double cutoff = 1e-12 * std::max(1.0, eigs.cwiseAbs().maxCoeff());
  Eigen::Vector2d inv_eigs = Eigen::Vector2d::Zero();
  for (int i = 0; i < 2; ++i) {
    if (eigs[i] > cutoff) inv_eigs[i] = 1.0 / eigs[i];
  }
  return es.eigenvectors() * inv_eigs.asDiagonal() *
         es.eigenvectors().transpose();
}

JointGaussianTrajectory condition_on_step(const JointGaussianTrajectory& joint,
                                          int step,
                                          const Eigen::Vector2d& value) {
  if (step <= joint.origin_step() || step >= joint.horizon()) {
    throw std::invalid_argument(
        "condition_on_step: step must lie strictly inside the joint's range");
  }
  const int n_rem = joint.horizon() - step;
  const Eigen::Matrix2d inv = psd_pseudo_inverse(joint.cov(step));

  Eigen::MatrixXd cross_block(2 * n_rem, 2);
  Eigen::VectorXd mean_rem(2 * n_rem);
  for (int k = 0; k < n_rem; ++k) {
    const int t = step + 1 + k;
    cross_block.block<2, 2>(2 * k, 0) = joint.cross(t, step);
    mean_rem.segment<2>(2 * k) = joint.mean(t);
  }

  Eigen::MatrixXd cov_rem(2 * n_rem, 2 * n_rem);
  for (int k1 = 0; k1 < n_rem; ++k1) {
    for (int k2 = 0; k2 < n_rem; ++k2) {
      cov_rem.block<2, 2>(2 * k1, 2 * k2) =
          joint.cross(step + 1 + k1, step + 1 + k2);
    }
  }

  const Eigen::MatrixXd gain = cross_block * inv;
  const Eigen::VectorXd new_mean =
      mean_rem + gain * (value - joint.mean(step));
  const Eigen::MatrixXd new_cov =
      symmetrized(cov_rem - gain * cross_block.transpose());
  return JointGaussianTrajectory(step, joint.horizon(), new_mean, new_cov);
}

Eigen::VectorXd sample(const Gaussian& g, RandomStream& rng) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g.cov);
  if (es.info() != Eigen::Success) {
    throw std::runtime_error("sample: eigendecomposition failed");
  }
  Eigen::VectorXd eigs = es.eigenvalues();
  const double scale = std::max(1.0, eigs.cwiseAbs().maxCoeff());
  if (eigs.minCoeff() < kPsdFloor * scale) {
    throw std::runtime_error("sample: covariance is indefinite");
  }
  eigs = eigs.cwiseMax(0.0);
  Eigen::VectorXd z(g.dim());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
  return g.mean + es.eigenvectors() * eigs.cwiseSqrt().asDiagonal() * z;
}

}  // namespace prfmpc::gauss
