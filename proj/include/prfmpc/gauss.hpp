#pragma once

#include <Eigen/Core>

#include "prfmpc/random.hpp"

namespace prfmpc::gauss {

/// Multivariate Gaussian value type. Construction validates that the
/// covariance is symmetric (componentwise within 1e-12), positive
/// semidefinite (eigenvalues >= -1e-10 relative to scale), and dimensionally
/// consistent with the mean.
struct Gaussian {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;

  Gaussian(Eigen::VectorXd mean_in, Eigen::MatrixXd cov_in);

  Eigen::Index dim() const { return mean.size(); }
};

/// Joint Gaussian over the planar positions of one obstacle at timesteps
/// origin_step+1 .. horizon. Stores the stacked mean and the full stacked
/// covariance, so pairwise cross-covariances are 2x2 blocks of one PSD
/// matrix and the joint is consistent by construction.
class JointGaussianTrajectory {
 public:
  /// `mean` is 2(horizon - origin_step) long, `cov` the matching stacked
  /// covariance. Validates symmetry, PSD, and dimensions.
  JointGaussianTrajectory(int origin_step, int horizon, Eigen::VectorXd mean,
                          Eigen::MatrixXd cov);

  int origin_step() const { return origin_step_; }
  int horizon() const { return horizon_; }
  int steps() const { return horizon_ - origin_step_; }

  /// Marginal mean of the position at timestep t (origin_step < t <= horizon).
  Eigen::Vector2d mean(int t) const;
  /// Marginal covariance at timestep t.
  Eigen::Matrix2d cov(int t) const;
  /// Cross-covariance between timesteps t1 and t2; cross(t, t) == cov(t).
  Eigen::Matrix2d cross(int t1, int t2) const;

  const Eigen::VectorXd& stacked_mean() const { return mean_; }
  const Eigen::MatrixXd& stacked_cov() const { return cov_; }

 private:
  int block_index(int t) const;

  int origin_step_;
  int horizon_;
  Eigen::VectorXd mean_;
  Eigen::MatrixXd cov_;
};

/// Standard normal CDF, Phi(z), evaluated through erfc so both tails keep
/// relative accuracy.
double std_normal_cdf(double z);

/// Inverse standard normal CDF. Rational initial guess refined by one Halley
/// step of the erfc-based CDF; |Phi(result) - p| <= 1e-9 over
/// p in [1e-12, 1 - 1e-12]. Throws std::domain_error outside (0, 1).
double std_normal_quantile(double p);

/// Conditional distribution of the position at timestep t given that the
/// position at timestep origin+a equals `value`, via the Gaussian projection
/// theorem. The conditional covariance does not depend on `value`.
/// Throws SingularCovarianceError when the conditioning covariance block is
/// singular; a smallest eigenvalue in (0, 1e-12] is regularized by adding
/// 1e-12*I before inversion.
Gaussian condition(const JointGaussianTrajectory& joint, int t, int a,
                   const Eigen::Vector2d& value);

/// Distribution of the conditional mean E[pos_t | pos_{origin+a}] viewed as a
/// random variable: mean equals the marginal mean at t, covariance equals
/// cross * inv(cov_{origin+a}) * cross^T.
Gaussian conditional_mean_distribution(const JointGaussianTrajectory& joint,
                                       int t, int a);

/// Pseudo-inverse of a symmetric PSD 2x2 block: eigenvalues at or below
/// 1e-12 (relative to the largest) are treated as zero. For any valid joint
/// covariance the cross blocks lie in the range of the marginal block, so
/// conditioning with this inverse is always consistent, including the fully
/// deterministic (zero-covariance) case.
Eigen::Matrix2d psd_pseudo_inverse(const Eigen::Matrix2d& s);

/// Conditions the whole trajectory on the position at `step` and returns the
/// joint over the remaining timesteps step+1..horizon, with origin_step
/// advanced to `step`. Degenerate conditioning blocks are handled in the
/// pseudo-inverse sense rather than raising, so deterministic obstacles
/// condition to themselves.
JointGaussianTrajectory condition_on_step(const JointGaussianTrajectory& joint,
                                          int step,
                                          const Eigen::Vector2d& value);

/// Draw one sample. Uses a symmetric eigendecomposition square root, so
/// singular covariances (including exactly zero) are handled; an indefinite
/// covariance raises std::runtime_error. Deterministic for a fixed stream
/// state.
Eigen::VectorXd sample(const Gaussian& g, RandomStream& rng);

}  // namespace prfmpc::gauss
