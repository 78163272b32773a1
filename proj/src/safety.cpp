#include "prfmpc/safety.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace prfmpc::safety {

RiskAllocation::RiskAllocation(double epsilon_in, int horizon_in,
                               double gamma_in)
    : epsilon(epsilon_in), horizon(horizon_in), gamma(gamma_in) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) {
    throw std::invalid_argument("RiskAllocation: epsilon must lie in (0,1)");
  }
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw std::invalid_argument("RiskAllocation: gamma must lie in (0,1)");
  }
  if (horizon < 2) {
    throw std::invalid_argument("RiskAllocation: horizon must be at least 2");
  }
}

Eigen::Vector2d tangent_direction(const Eigen::Vector2d& x_ref,
                                  const Eigen::Vector2d& mu0) {
  const Eigen::Vector2d m = mu0 - x_ref;
  if (m.norm() == 0.0) {
    throw std::invalid_argument(
        "tangent_direction: reference position coincides with the obstacle "
        "mean; tangent direction is undefined");
  }
  return m;
}

double nominal_level(const HalfspaceConstraint& h, const Eigen::Vector2d& x) {
  return h.m.dot(x - h.mu) + h.r * h.m.norm() +
         h.gamma_t * std::sqrt(h.m.dot(h.sigma * h.m));
}

double realized_level(const HalfspaceConstraint& h, const Eigen::Vector2d& x,
                      const Eigen::Vector2d& mu_next,
                      const Eigen::Matrix2d& sigma_next) {
  return h.m.dot(x - mu_next) + h.r * h.m.norm() +
         h.gamma_t * std::sqrt(h.m.dot(sigma_next * h.m));
}

bool legacy_condition_satisfied(const Eigen::Vector2d& mu_a,
                                const Eigen::Vector2d& mu_b,
                                const Eigen::Matrix2d& sigma_a,
                                const Eigen::Matrix2d& sigma_b,
                                double gamma_t) {
  const double mean_shift = (mu_a - mu_b).norm();
  const double cov_shift =
      std::sqrt(sigma_a.norm()) - std::sqrt(sigma_b.norm());
  return mean_shift <= gamma_t * cov_shift;
}

MarginTable::MarginTable(int horizon,
                         std::vector<std::vector<double>> entries,
                         std::vector<std::vector<Eigen::Matrix2d>>
                             conditional_covs)
    : horizon_(horizon),
      c_(std::move(entries)),
      cond_cov_(std::move(conditional_covs)) {}

double MarginTable::c(int t, int i) const {
  if (t < 2 || t > horizon_ || i < 0 || i > t - 2) {
    throw std::invalid_argument("MarginTable::c: index (t=" +
                                std::to_string(t) + ", i=" +
                                std::to_string(i) + ") out of range");
  }
  return c_[t][i];
}

double MarginTable::cum(int t, int tau) const {
  if (t < 1 || t > horizon_ || tau < 0 || tau > t - 1) {
    throw std::invalid_argument("MarginTable::cum: index (t=" +
                                std::to_string(t) + ", tau=" +
                                std::to_string(tau) + ") out of range");
  }
  double sum = 0.0;
  for (int i = tau; i <= t - 2; ++i) sum += c_[t][i];
  return sum;
}

const Eigen::Matrix2d& MarginTable::conditional_cov(int t, int tau) const {
  if (t < 1 || t > horizon_ || tau < 0 || tau >= t) {
    throw std::invalid_argument(
        "MarginTable::conditional_cov: index (t=" + std::to_string(t) +
        ", tau=" + std::to_string(tau) + ") out of range");
  }
  return cond_cov_[t][tau];
}

namespace {

/// Margin for one (t, i) pair given the joint as seen at planning step i.
/// Uses pseudo-inverse conditioning so a deterministic obstacle produces the
/// zero margin it needs rather than a singularity error.
double margin_from_step_joint(const gauss::JointGaussianTrajectory& joint_i,
                              int t, const RiskAllocation& alloc,
                              const Eigen::Vector2d& m) {
  const int next = joint_i.origin_step() + 1;
  const Eigen::Matrix2d sigma_ti = joint_i.cov(t);
  // Conditional covariance and conditional-mean covariance one step ahead;
  // both are independent of the conditioning value.
  const Eigen::Matrix2d gain =
      joint_i.cross(t, next) * gauss::psd_pseudo_inverse(joint_i.cov(next));
  const Eigen::Matrix2d sigma_mu_hat = gain * joint_i.cross(next, t);
  const Eigen::Matrix2d sigma_hat = sigma_ti - sigma_mu_hat;

  const double proj_prior = std::sqrt(m.dot(sigma_ti * m));
  const double proj_hat = std::sqrt(m.dot(sigma_hat * m));
  const double proj_mu_hat = std::sqrt(m.dot(sigma_mu_hat * m));
  const double raw = -alloc.gamma_t() * (proj_prior - proj_hat) +
                     alloc.gamma_bar_quantile() * proj_mu_hat;
  return std::max(raw, 0.0);
}

void check_joint_at_zero(const gauss::JointGaussianTrajectory& joint,
                         const RiskAllocation& alloc) {
  if (joint.origin_step() != 0 || joint.horizon() != alloc.horizon) {
    throw std::invalid_argument(
        "margin table: joint must be anchored at step 0 and span the full "
        "horizon");
  }
}

}  // namespace

double margin_step(const gauss::JointGaussianTrajectory& joint_at_0, int t,
                   int i, const RiskAllocation& alloc,
                   const Eigen::Vector2d& m) {
  check_joint_at_zero(joint_at_0, alloc);
  if (t < 2 || t > joint_at_0.horizon() || i < 0 || i > t - 2) {
    throw std::invalid_argument("margin_step: requires 0 <= i <= t-2 <= T-2");
  }
  gauss::JointGaussianTrajectory joint_i = joint_at_0;
  for (int step = 1; step <= i; ++step) {
    joint_i = gauss::condition_on_step(joint_i, step, joint_i.mean(step));
  }
  return margin_from_step_joint(joint_i, t, alloc, m);
}

MarginTable build_margin_table(const gauss::JointGaussianTrajectory& joint_at_0,
                               const RiskAllocation& alloc,
                               std::span<const Eigen::Vector2d> directions) {
  check_joint_at_zero(joint_at_0, alloc);
  const int T = alloc.horizon;
  if (static_cast<int>(directions.size()) < T + 1) {
    throw std::invalid_argument(
        "build_margin_table: need one direction per timestep 1..T");
  }

  std::vector<std::vector<double>> entries(T + 1);
  for (int t = 2; t <= T; ++t) entries[t].assign(t - 1, 0.0);
  std::vector<std::vector<Eigen::Matrix2d>> cond_covs(T + 1);
  for (int t = 1; t <= T; ++t) {
    cond_covs[t].assign(t, Eigen::Matrix2d::Zero());
  }

  gauss::JointGaussianTrajectory joint_i = joint_at_0;
  for (int i = 0; i <= T - 1; ++i) {
    if (i > 0) {
      joint_i = gauss::condition_on_step(joint_i, i, joint_i.mean(i));
    }
    for (int t = i + 1; t <= T; ++t) {
      cond_covs[t][i] = joint_i.cov(t);
    }
    if (i > T - 2) continue;
    for (int t = i + 2; t <= T; ++t) {
      entries[t][i] = margin_from_step_joint(joint_i, t, alloc, directions[t]);
    }
  }
  return MarginTable(T, std::move(entries), std::move(cond_covs));
}

}  // namespace prfmpc::safety
