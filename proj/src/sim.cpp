#include "prfmpc/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "prfmpc/errors.hpp"
#include "prfmpc/random.hpp"

namespace prfmpc::sim {

namespace {

std::vector<Eigen::Vector2d> tangent_directions(
    const gauss::JointGaussianTrajectory& joint0,
    const std::vector<Eigen::Vector4d>& reference) {
  const int T = joint0.horizon();
  std::vector<Eigen::Vector2d> directions(T + 1, Eigen::Vector2d::Zero());
  for (int t = 1; t <= T; ++t) {
    directions[t] =
        safety::tangent_direction(reference[t].head<2>(), joint0.mean(t));
  }
  return directions;
}

}  // namespace

TrialResult run_trial(const TrialConfig& cfg, planner::Variant variant) {
  const int T = cfg.horizon;
  const predictor::OVModel ov = cfg.ov_model();
  const planner::EgoModel ego = cfg.ego_model();
  const safety::RiskAllocation alloc = cfg.allocation();
  const std::vector<Eigen::Vector4d> reference =
      build_reference(cfg.reference, cfg.dt, T);

  RandomStream rng(cfg.seed);
  predictor::OVState ov_state{cfg.ov_init, 0};
  Eigen::Vector4d ego_state = cfg.ego_init;

  const gauss::JointGaussianTrajectory joint0 = predictor::predict(ov, ov_state, T);
  const std::vector<Eigen::Vector2d> directions =
      tangent_directions(joint0, reference);
  const safety::MarginTable table =
      safety::build_margin_table(joint0, alloc, directions);

  TrialResult result;
  result.d_min = (ego_state.head<2>() - ov_state.position).norm();

  planner::PlanResult previous;
  bool have_previous = false;

  for (int tau = 0; tau < T; ++tau) {
    const gauss::JointGaussianTrajectory prediction =
        tau == 0 ? joint0 : predictor::predict(ov, ov_state, T);

    if (variant == planner::Variant::prf && tau > 0) {
      // The margins were priced at step 0 assuming these exact conditional
      // covariances; a mismatch means the predictor broke consistency.
      for (int t = tau + 1; t <= T; ++t) {
        const double err = (prediction.cov(t) - table.conditional_cov(t, tau))
                               .cwiseAbs()
                               .maxCoeff();
        if (err > 1e-9) {
          throw std::logic_error(
              "run_trial: predictor covariance at (t=" + std::to_string(t) +
              ", tau=" + std::to_string(tau) +
              ") deviates from the precomputed conditional covariance by " +
              std::to_string(err));
        }
      }
    }

    const planner::MPCProblem problem = planner::build_problem(
        ego, tau, ego_state, prediction, table, alloc, reference, directions,
        cfg.safe_radius, variant);

    planner::PlanResult plan;
    try {
      plan = planner::solve(problem, cfg.solver,
                            have_previous ? &previous : nullptr);
    } catch (const SolverFailureError&) {
      result.solver_failure = true;
      break;
    }

    StepRecord record;
    record.tau = tau;
    record.feasible = plan.status == planner::PlanStatus::feasible;
    record.ego_state = ego_state;
    record.ov_position = ov_state.position;
    record.solve_time = plan.solve_time;
    record.iterations = plan.iterations;
    record.planned = plan.states;
    record.halfspaces = problem.halfspaces;
    if (record.feasible) record.input = plan.inputs.front();
    result.steps.push_back(std::move(record));

    result.max_solve_time = std::max(result.max_solve_time, plan.solve_time);
    result.max_iterations = std::max(result.max_iterations, plan.iterations);

    if (plan.status != planner::PlanStatus::feasible) {
      if (tau == 0) {
        result.initially_feasible = false;
      } else {
        result.rf_ok = false;
      }
      return result;
    }
    if (tau == 0) {
      result.initially_feasible = true;
      result.rf_ok = true;
    }

    ego_state = ego.step(ego_state, plan.inputs.front());
    ov_state = predictor::simulate_step(ov, ov_state, rng);

    const int t = tau + 1;
    result.closed_loop_cost +=
        (ego_state.head<2>() - reference[t].head<2>()).squaredNorm();
    result.d_min = std::min(result.d_min,
                            (ego_state.head<2>() - ov_state.position).norm());

    previous = std::move(plan);
    have_previous = true;
  }
  return result;
}

AggregateMetrics aggregate(const std::vector<TrialResult>& trials,
                           double safe_radius) {
  AggregateMetrics agg;
  agg.n_trials = static_cast<int>(trials.size());
  double cost_sum = 0.0;
  double cost_rf_sum = 0.0;
  double d_min_sum = 0.0;
  double time_sum = 0.0;
  int time_count = 0;
  int collisions = 0;
  for (const TrialResult& trial : trials) {
    if (trial.solver_failure) {
      ++agg.n_solver_failures;
      continue;
    }
    time_sum += trial.max_solve_time;
    ++time_count;
    if (!trial.initially_feasible) continue;
    ++agg.n_initially_feasible;
    cost_sum += trial.closed_loop_cost;
    d_min_sum += trial.d_min;
    if (trial.d_min < safe_radius) ++collisions;
    if (trial.rf_ok) {
      ++agg.n_rf_ok;
      cost_rf_sum += trial.closed_loop_cost;
    }
  }
  if (agg.n_initially_feasible > 0) {
    agg.rf_rate = static_cast<double>(agg.n_rf_ok) / agg.n_initially_feasible;
    agg.mean_cost = cost_sum / agg.n_initially_feasible;
    agg.mean_d_min = d_min_sum / agg.n_initially_feasible;
    agg.collision_rate =
        static_cast<double>(collisions) / agg.n_initially_feasible;
  }
  if (agg.n_trials > 0) {
    agg.rf_rate_all_trials = static_cast<double>(agg.n_rf_ok) / agg.n_trials;
  }
  if (agg.n_rf_ok > 0) agg.mean_cost_rf_only = cost_rf_sum / agg.n_rf_ok;
  if (time_count > 0) agg.mean_max_solve_time = time_sum / time_count;
  return agg;
}

AggregateMetrics run_batch_collect(const TrialConfig& cfg, int n_trials,
                                   planner::Variant variant, int parallelism,
                                   std::vector<TrialResult>* trials_out) {
  if (n_trials < 1) {
    throw std::invalid_argument("run_batch: n_trials must be at least 1");
  }
  std::vector<TrialResult> trials(n_trials);
  const int workers =
      std::max(1, std::min(parallelism, n_trials));

  const auto run_one = [&cfg, &variant, &trials](int index) {
    TrialConfig trial_cfg = cfg;
    trial_cfg.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(index));
    trials[index] = run_trial(trial_cfg, variant);
  };

  if (workers == 1) {
    for (int i = 0; i < n_trials; ++i) run_one(i);
  } else {
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&]() {
        while (true) {
          const int index = next.fetch_add(1);
          if (index >= n_trials) return;
          try {
            run_one(index);
          } catch (...) {
            std::lock_guard<std::mutex> lock(error_mutex);
            if (!error) error = std::current_exception();
            return;
          }
        }
      });
    }
    for (std::thread& worker : pool) worker.join();
    if (error) std::rethrow_exception(error);
  }

  AggregateMetrics agg = aggregate(trials, cfg.safe_radius);
  if (trials_out != nullptr) *trials_out = std::move(trials);
  return agg;
}

AggregateMetrics run_batch(const TrialConfig& cfg, int n_trials,
                           planner::Variant variant, int parallelism) {
  return run_batch_collect(cfg, n_trials, variant, parallelism, nullptr);
}

std::vector<HorizonStudyRow> legacy_condition_study(
    const TrialConfig& cfg, std::span<const int> horizons, int n_trials,
    int parallelism) {
  std::vector<HorizonStudyRow> rows;
  const predictor::OVModel ov = cfg.ov_model();

  for (const int T : horizons) {
    if (T < 2) {
      throw std::invalid_argument(
          "legacy_condition_study: horizons must be at least 2");
    }
    HorizonStudyRow row;
    row.horizon = T;

    const safety::RiskAllocation alloc(cfg.epsilon, T, cfg.gamma);
    const double gamma_t = alloc.gamma_t();
    const std::uint64_t base =
        derive_seed(cfg.seed, 0x1000u + static_cast<std::uint64_t>(T));

    // Satisfaction of the legacy condition at every (t, tau) pair along a
    // re-predicted closed-loop obstacle rollout.
    int satisfied = 0;
    for (int trial = 0; trial < n_trials; ++trial) {
      RandomStream rng(derive_seed(base, trial));
      std::vector<Eigen::Vector2d> positions(T);
      predictor::OVState state{cfg.ov_init, 0};
      positions[0] = state.position;
      for (int step = 1; step < T; ++step) {
        state = predictor::simulate_step(ov, state, rng);
        positions[step] = state.position;
      }
      const Eigen::Matrix2d step_cov = cfg.dt * cfg.dt * cfg.ov_velocity_cov;
      bool all_pairs = true;
      for (int t = 2; t <= T && all_pairs; ++t) {
        for (int tau = 0; tau + 2 <= t; ++tau) {
          const Eigen::Vector2d mu_a =
              positions[tau] + (t - tau) * cfg.dt * cfg.ov_nominal_velocity;
          const Eigen::Vector2d mu_b =
              positions[tau + 1] +
              (t - tau - 1) * cfg.dt * cfg.ov_nominal_velocity;
          const Eigen::Matrix2d sigma_a = (t - tau) * step_cov;
          const Eigen::Matrix2d sigma_b = (t - tau - 1) * step_cov;
          if (!safety::legacy_condition_satisfied(mu_a, mu_b, sigma_a,
                                                  sigma_b, gamma_t)) {
            all_pairs = false;
            break;
          }
        }
      }
      if (all_pairs) ++satisfied;
    }
    row.satisfaction_rate = static_cast<double>(satisfied) / n_trials;

    TrialConfig horizon_cfg = cfg;
    horizon_cfg.horizon = T;
    horizon_cfg.seed = derive_seed(base, 0xA0);
    row.nominal_rf_rate =
        run_batch(horizon_cfg, n_trials, planner::Variant::nominal,
                  parallelism)
            .rf_rate;
    horizon_cfg.seed = derive_seed(base, 0xB0);
    row.prf_rf_rate =
        run_batch(horizon_cfg, n_trials, planner::Variant::prf, parallelism)
            .rf_rate;
    rows.push_back(row);
  }
  return rows;
}

InclusionProbeResult inclusion_probe(const TrialConfig& cfg, int n_samples,
                                     double margin_scale) {
  if (n_samples < 1) {
    throw std::invalid_argument("inclusion_probe: n_samples must be positive");
  }
  const int T = cfg.horizon;
  const predictor::OVModel ov = cfg.ov_model();
  const safety::RiskAllocation alloc = cfg.allocation();
  const std::vector<Eigen::Vector4d> reference =
      build_reference(cfg.reference, cfg.dt, T);
  const gauss::JointGaussianTrajectory joint0 =
      predictor::predict(ov, predictor::OVState{cfg.ov_init, 0}, T);
  const std::vector<Eigen::Vector2d> directions =
      tangent_directions(joint0, reference);
  const safety::MarginTable table =
      safety::build_margin_table(joint0, alloc, directions);
  const double gamma_t = alloc.gamma_t();

  // The inclusion event is independent of the evaluation point because the
  // tangent slope is shared; any fixed x works.
  const Eigen::Vector2d x_eval = cfg.ego_init.head<2>();

  std::vector<std::vector<long>> counts(T + 1);
  for (int t = 2; t <= T; ++t) counts[t].assign(t - 1, 0);
  long joint_count = 0;

  for (int s = 0; s < n_samples; ++s) {
    RandomStream rng(derive_seed(derive_seed(cfg.seed, 0xA11), s));
    std::vector<Eigen::Vector2d> positions(T + 1);
    predictor::OVState state{cfg.ov_init, 0};
    positions[0] = state.position;
    for (int step = 1; step <= T; ++step) {
      state = predictor::simulate_step(ov, state, rng);
      positions[step] = state.position;
    }

    bool all_ok = true;
    for (int tau = 0; tau + 2 <= T; ++tau) {
      const gauss::JointGaussianTrajectory joint_tau =
          predictor::predict(ov, predictor::OVState{positions[tau], tau}, T);
      for (int t = tau + 2; t <= T; ++t) {
        safety::HalfspaceConstraint h;
        h.t = t;
        h.m = directions[t];
        h.r = cfg.safe_radius;
        h.gamma_t = gamma_t;
        h.mu = joint_tau.mean(t);
        h.sigma = joint_tau.cov(t);
        const double level = safety::nominal_level(h, x_eval);
        const gauss::Gaussian conditioned =
            gauss::condition(joint_tau, t, 1, positions[tau + 1]);
        const double next_level = safety::realized_level(
            h, x_eval, conditioned.mean.head<2>(),
            conditioned.cov.topLeftCorner<2, 2>());
        const double margin = margin_scale * table.c(t, tau);
        const bool ok = next_level <= level + margin;
        if (ok) {
          ++counts[t][tau];
        } else {
          all_ok = false;
        }
      }
    }
    if (all_ok) ++joint_count;
  }

  InclusionProbeResult result;
  result.gamma_bar = alloc.gamma_bar();
  result.n_samples = n_samples;
  result.joint_frequency = static_cast<double>(joint_count) / n_samples;
  for (int t = 2; t <= T; ++t) {
    for (int tau = 0; tau + 2 <= t; ++tau) {
      InclusionProbeResult::PairFrequency pair;
      pair.t = t;
      pair.tau = tau;
      pair.frequency = static_cast<double>(counts[t][tau]) / n_samples;
      pair.margin = margin_scale * table.c(t, tau);
      result.pairs.push_back(pair);
    }
  }
  return result;
}

}  // namespace prfmpc::sim
