#include "prfmpc/predictor.hpp"

#include <algorithm>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace prfmpc::predictor {

OVModel::OVModel(Eigen::Vector2d nominal_velocity_in,
                 Eigen::Matrix2d velocity_cov_in, double dt_in)
    : nominal_velocity(std::move(nominal_velocity_in)),
      velocity_cov(std::move(velocity_cov_in)),
      dt(dt_in) {
  if (dt <= 0.0) {
    throw std::invalid_argument("OVModel: dt must be positive");
  }
  if ((velocity_cov - velocity_cov.transpose()).cwiseAbs().maxCoeff() >
      1e-12) {
    throw std::invalid_argument("OVModel: velocity covariance not symmetric");
  }
  const double half_trace = 0.5 * velocity_cov.trace();
  const double half_gap = 0.5 * (velocity_cov(0, 0) - velocity_cov(1, 1));
  const double min_eig =
      half_trace - std::sqrt(half_gap * half_gap +
                             velocity_cov(0, 1) * velocity_cov(0, 1));
  if (min_eig < -1e-10) {
    throw std::invalid_argument(
        "OVModel: velocity covariance not positive semidefinite");
  }
}

gauss::JointGaussianTrajectory predict(const OVModel& model,
                                       const OVState& obs, int horizon) {
  if (obs.step >= horizon) {
    throw std::invalid_argument("predict: observation step " +
                                std::to_string(obs.step) +
                                " leaves an empty horizon (T = " +
                                std::to_string(horizon) + ")");
  }
  const int n = horizon - obs.step;
  const Eigen::Matrix2d step_cov = model.dt * model.dt * model.velocity_cov;

  Eigen::VectorXd mean(2 * n);
  Eigen::MatrixXd cov(2 * n, 2 * n);
  for (int i = 0; i < n; ++i) {
    mean.segment<2>(2 * i) =
        obs.position + (i + 1) * model.dt * model.nominal_velocity;
    for (int j = 0; j < n; ++j) {
      // Shared velocity increments: min(i+1, j+1) of them.
      cov.block<2, 2>(2 * i, 2 * j) = std::min(i + 1, j + 1) * step_cov;
    }
  }
  return gauss::JointGaussianTrajectory(obs.step, horizon, std::move(mean),
                                        std::move(cov));
}

OVState simulate_step(const OVModel& model, const OVState& state,
                      RandomStream& rng) {
  const gauss::Gaussian velocity(model.nominal_velocity, model.velocity_cov);
  const Eigen::Vector2d v = gauss::sample(velocity, rng);
  return OVState{state.position + model.dt * v, state.step + 1};
}

double conditional_invariance_error(const OVModel& predict_model,
                                    const OVModel& repredict_model, int tau,
                                    int t, int horizon,
                                    std::span<const Eigen::Vector2d> values) {
  if (!(tau + 1 < t && t <= horizon)) {
    throw std::invalid_argument(
        "conditional_invariance_error: requires tau+1 < t <= horizon");
  }
  const gauss::JointGaussianTrajectory at_tau =
      predict(predict_model, OVState{Eigen::Vector2d::Zero(), tau}, horizon);

  double worst = 0.0;
  for (const Eigen::Vector2d& value : values) {
    const gauss::Gaussian conditioned = gauss::condition(at_tau, t, 1, value);
    const gauss::JointGaussianTrajectory repredicted =
        predict(repredict_model, OVState{value, tau + 1}, horizon);
    const double mean_err =
        (conditioned.mean - repredicted.mean(t).eval()).cwiseAbs().maxCoeff();
    const double cov_err =
        (conditioned.cov - repredicted.cov(t)).cwiseAbs().maxCoeff();
    worst = std::max({worst, mean_err, cov_err});
  }
  return worst;
}

bool verify_conditional_invariance(const OVModel& model, int tau, int t,
                                   int horizon, double tolerance) {
  // Grid of conditioning values around the one-step-ahead mean, spread by
  // a couple of standard deviations in each axis.
  const Eigen::Vector2d center = model.dt * model.nominal_velocity;
  const double sx = model.dt * std::sqrt(model.velocity_cov(0, 0));
  const double sy = model.dt * std::sqrt(model.velocity_cov(1, 1));
  std::vector<Eigen::Vector2d> values;
  for (const double ax : {-2.0, 0.0, 2.0}) {
    for (const double ay : {-2.0, 0.0, 2.0}) {
      values.push_back(center + Eigen::Vector2d(ax * sx, ay * sy));
    }
  }
  return conditional_invariance_error(model, model, tau, t, horizon, values) <=
         tolerance;
}

}  // namespace prfmpc::predictor
