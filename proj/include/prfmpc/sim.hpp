#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "prfmpc/planner.hpp"
#include "prfmpc/predictor.hpp"
#include "prfmpc/reference.hpp"
#include "prfmpc/safety.hpp"

namespace prfmpc::sim {

struct TrialConfig {
  int horizon = 9;
  double dt = 0.5;
  double epsilon = 0.05;
  double gamma = 0.1;
  double safe_radius = 4.0;
  Eigen::Vector4d ego_init{0.0, 0.0, 15.0, 0.0};
  Eigen::Vector2d ov_init{-8.0, 3.5};
  Eigen::Vector2d ov_nominal_velocity{15.0, 0.0};
  Eigen::Matrix2d ov_velocity_cov =
      (Eigen::Matrix2d() << 1.0, 0.0, 0.0, 0.25).finished();
  ReferenceParams reference;
  std::uint64_t seed = 20250801;
  double input_weight = 1e-4;
  qp::Settings solver;

  predictor::OVModel ov_model() const {
    return predictor::OVModel(ov_nominal_velocity, ov_velocity_cov, dt);
  }
  planner::EgoModel ego_model() const {
    return planner::EgoModel::from_dt(dt);
  }
  safety::RiskAllocation allocation() const {
    return safety::RiskAllocation(epsilon, horizon, gamma);
  }
};

/// Per-planning-step record kept for traces and replay checks.
struct StepRecord {
  int tau = 0;
  bool feasible = false;
  Eigen::Vector4d ego_state = Eigen::Vector4d::Zero();  // state at step tau
  Eigen::Vector2d ov_position = Eigen::Vector2d::Zero();
  Eigen::Vector2d input = Eigen::Vector2d::Zero();
  double solve_time = 0.0;
  long iterations = 0;
  std::vector<Eigen::Vector4d> planned;                  // x_{tau+1..T}
  std::vector<safety::HalfspaceConstraint> halfspaces;   // t = tau+1..T
};

struct TrialResult {
  bool initially_feasible = false;
  bool rf_ok = false;      // meaningful only when initially_feasible
  bool solver_failure = false;
  double closed_loop_cost = 0.0;
  double d_min = 0.0;
  double max_solve_time = 0.0;
  long max_iterations = 0;  // deterministic per-trial solver work
  std::vector<StepRecord> steps;
};

struct AggregateMetrics {
  int n_trials = 0;
  int n_initially_feasible = 0;
  int n_rf_ok = 0;
  int n_solver_failures = 0;
  double rf_rate = 0.0;              // n_rf_ok / n_initially_feasible
  double rf_rate_all_trials = 0.0;   // n_rf_ok / n_trials
  double mean_cost = 0.0;            // over initially feasible trials
  double mean_cost_rf_only = 0.0;    // over recursively feasible trials
  double mean_d_min = 0.0;           // over initially feasible trials
  double mean_max_solve_time = 0.0;  // wall-clock, measured
  double collision_rate = 0.0;       // d_min < safe radius, init. feasible
};

/// One closed-loop shrinking-horizon trial. Predictions are re-anchored on
/// the exactly observed obstacle position each step; margins are built once
/// at step 0. On infeasibility at a later step the trial freezes (no
/// recovery) and is scored on the executed prefix.
TrialResult run_trial(const TrialConfig& cfg, planner::Variant variant);

/// Runs n_trials trials with per-trial seeds derive_seed(cfg.seed, i) and a
/// deterministic index-ordered aggregation, so the result is bitwise
/// independent of the parallelism degree.
AggregateMetrics run_batch(const TrialConfig& cfg, int n_trials,
                           planner::Variant variant, int parallelism);

/// Same as run_batch but also returns per-trial results (index order).
AggregateMetrics run_batch_collect(const TrialConfig& cfg, int n_trials,
                                   planner::Variant variant, int parallelism,
                                   std::vector<TrialResult>* trials);

AggregateMetrics aggregate(const std::vector<TrialResult>& trials,
                           double safe_radius);

struct HorizonStudyRow {
  int horizon = 0;
  double satisfaction_rate = 0.0;  // legacy condition holds at every pair
  double nominal_rf_rate = 0.0;
  double prf_rf_rate = 0.0;
};

/// Sweeps the horizon: per T, the fraction of closed-loop prediction
/// sequences satisfying the legacy mean-shift/covariance-shift condition at
/// every (t, tau) pair, plus closed-loop RF rates for both planner variants.
std::vector<HorizonStudyRow> legacy_condition_study(
    const TrialConfig& cfg, std::span<const int> horizons, int n_trials,
    int parallelism);

struct InclusionProbeResult {
  struct PairFrequency {
    int t = 0;
    int tau = 0;
    double frequency = 0.0;
    double margin = 0.0;
  };
  std::vector<PairFrequency> pairs;
  double joint_frequency = 0.0;
  double gamma_bar = 0.0;
  int n_samples = 0;
};

/// Monte Carlo check of the one-step safe-set inclusion events: for each
/// (t, tau) pair, the frequency of the next-step level set still containing
/// the current tightened one. margin_scale rescales the table margins, which
/// can only move frequencies upward when > 1.
InclusionProbeResult inclusion_probe(const TrialConfig& cfg, int n_samples,
                                     double margin_scale = 1.0);

}  // namespace prfmpc::sim
