#pragma once

#include <span>

#include <Eigen/Core>

#include "prfmpc/gauss.hpp"
#include "prfmpc/random.hpp"

namespace prfmpc::predictor {

/// Obstacle vehicle model: single integrator whose velocity is redrawn each
/// timestep from N(nominal_velocity, velocity_cov).
struct OVModel {
  Eigen::Vector2d nominal_velocity;
  Eigen::Matrix2d velocity_cov;
  double dt;

  OVModel(Eigen::Vector2d nominal_velocity_in,
          Eigen::Matrix2d velocity_cov_in, double dt_in);
};

struct OVState {
  Eigen::Vector2d position;
  int step;
};

/// Joint distribution of the obstacle positions over obs.step+1 .. horizon:
/// mean(t) = position + (t - step) * dt * nominal_velocity,
/// cov(t) = (t - step) * dt^2 * Q, cross(t1, t2) = min overlap * dt^2 * Q.
/// This is the exact law of the generative model, so samples drawn from it
/// match simulate_step rollouts in distribution and conditionals are
/// invariant to the prediction step.
gauss::JointGaussianTrajectory predict(const OVModel& model,
                                       const OVState& obs, int horizon);

/// Advance the obstacle one step with a freshly sampled velocity.
OVState simulate_step(const OVModel& model, const OVState& state,
                      RandomStream& rng);

/// Worst-case mismatch (over mean and covariance entries, and over a grid of
/// conditioning values) between conditioning the step-tau prediction on the
/// position at tau+1 and re-predicting from that position at tau+1. The two
/// models let tests inject a corrupted re-predictor as a negative control.
double conditional_invariance_error(const OVModel& predict_model,
                                    const OVModel& repredict_model, int tau,
                                    int t, int horizon,
                                    std::span<const Eigen::Vector2d> values);

/// True when the model's one-step conditional matches its own re-prediction
/// within `tolerance` on a default grid of conditioning values.
bool verify_conditional_invariance(const OVModel& model, int tau, int t,
                                   int horizon, double tolerance);

}  // namespace prfmpc::predictor
