#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "prfmpc/gauss.hpp"

namespace prfmpc::safety {

/// Uniform risk split over the planning horizon plus the per-pair violation
/// budget for the recursive-feasibility margins.
struct RiskAllocation {
  double epsilon;  // total collision risk over the horizon, in (0,1)
  int horizon;     // T
  double gamma;    // recursive-feasibility violation tolerance, in (0,1)

  RiskAllocation(double epsilon_in, int horizon_in, double gamma_in);

  double per_step() const { return epsilon / horizon; }
  double gamma_bar() const {
    return 2.0 * gamma / (static_cast<double>(horizon - 1) * horizon);
  }
  /// Quantile scaling the covariance term of every halfspace constraint.
  double gamma_t() const {
    return gauss::std_normal_quantile(1.0 - per_step());
  }
  /// Quantile for the per-pair inclusion budget.
  double gamma_bar_quantile() const {
    return gauss::std_normal_quantile(1.0 - gamma_bar());
  }
};

/// One tightened tangent-halfspace constraint at timestep t: the level
/// function m'(x - mu) + r*|m| + gamma_t*sqrt(m'Sigma m) plus a cumulative
/// recursive-feasibility margin.
struct HalfspaceConstraint {
  int t = 0;
  Eigen::Vector2d m = Eigen::Vector2d::Zero();  // tangent direction
  double r = 0.0;                               // safe radius (m)
  double gamma_t = 0.0;                         // quantile for this step
  Eigen::Vector2d mu = Eigen::Vector2d::Zero(); // obstacle mean at t
  Eigen::Matrix2d sigma = Eigen::Matrix2d::Zero();
  double margin = 0.0;                          // cumulative tightening, >= 0
};

/// Tangent direction of the safety circle, pointing from the reference
/// position toward the obstacle mean predicted at step 0. Frozen across all
/// planning steps. Throws std::invalid_argument when the reference coincides
/// with the obstacle mean.
Eigen::Vector2d tangent_direction(const Eigen::Vector2d& x_ref,
                                  const Eigen::Vector2d& mu0);

/// Level of the chance-constraint reformulation at x; <= 0 means the
/// individual chance constraint holds. The constraint's margin field is NOT
/// included here.
double nominal_level(const HalfspaceConstraint& h, const Eigen::Vector2d& x);

/// Level function as it will be evaluated one planning step later, at a
/// realized conditional mean and covariance.
double realized_level(const HalfspaceConstraint& h, const Eigen::Vector2d& x,
                      const Eigen::Vector2d& mu_next,
                      const Eigen::Matrix2d& sigma_next);

/// Legacy sufficient condition: the mean-prediction shift is bounded by the
/// covariance shift, compared with Frobenius norms. Ties count as satisfied.
bool legacy_condition_satisfied(const Eigen::Vector2d& mu_a,
                                const Eigen::Vector2d& mu_b,
                                const Eigen::Matrix2d& sigma_a,
                                const Eigen::Matrix2d& sigma_b,
                                double gamma_t);

/// Precomputed tightening margins c(t, i) for 2 <= t <= T, 0 <= i <= t-2,
/// their cumulative sums, and the conditional covariances the predictor is
/// expected to report at later planning steps.
class MarginTable {
 public:
  MarginTable(int horizon, std::vector<std::vector<double>> entries,
              std::vector<std::vector<Eigen::Matrix2d>> conditional_covs);

  int horizon() const { return horizon_; }

  /// Single-step margin c(t, i); valid for 2 <= t <= horizon, 0 <= i <= t-2.
  double c(int t, int i) const;

  /// Cumulative margin sum_{i=tau}^{t-2} c(t, i); cum(t, t-1) == 0.
  double cum(int t, int tau) const;

  /// Covariance of the position at t as predicted at planning step tau,
  /// derived from the step-0 joint by iterated conditioning. Valid for
  /// 0 <= tau < t <= horizon.
  const Eigen::Matrix2d& conditional_cov(int t, int tau) const;

 private:
  int horizon_;
  std::vector<std::vector<double>> c_;                    // c_[t][i]
  std::vector<std::vector<Eigen::Matrix2d>> cond_cov_;    // cond_cov_[t][tau]
};

/// Lemma-style single margin: the smallest nonnegative constant that makes
/// the step-i constraint at timestep t imply the step-(i+1) constraint with
/// probability 1 - gamma_bar. Computed from the step-0 joint by iterated
/// conditioning; all covariances involved are value-independent.
double margin_step(const gauss::JointGaussianTrajectory& joint_at_0, int t,
                   int i, const RiskAllocation& alloc,
                   const Eigen::Vector2d& m);

/// Builds the full margin table from the step-0 joint. `directions` holds
/// the frozen tangent direction for each timestep t = 1..T, indexed by t
/// (entry 0 unused).
MarginTable build_margin_table(const gauss::JointGaussianTrajectory& joint_at_0,
                               const RiskAllocation& alloc,
                               std::span<const Eigen::Vector2d> directions);

}  // namespace prfmpc::safety
