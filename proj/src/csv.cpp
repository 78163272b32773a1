#include "prfmpc/csv.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "prfmpc/errors.hpp"
#include "prfmpc/version.hpp"

namespace prfmpc::cli {

std::string format_double(double v) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.17g", v);
  return buffer;
}

const char* variant_name(planner::Variant variant) {
  return variant == planner::Variant::prf ? "prf" : "nominal";
}

double modeled_solve_seconds(long iterations) {
  // Calibrated once for the reference problem size (~54 variables); kept
  // fixed so the value is a pure function of the trial's deterministic
  // iteration count.
  constexpr double kSecondsPerIteration = 4.0e-6;
  return kSecondsPerIteration * static_cast<double>(iterations);
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) {
    throw IoError("cannot open '" + path + "' for writing");
  }
  file << content;
  if (!file.good()) {
    throw IoError("failed while writing '" + path + "'");
  }
}

void write_trials_csv(
    const std::string& path,
    const std::vector<std::pair<planner::Variant,
                                std::vector<sim::TrialResult>>>& batches) {
  std::ostringstream out;
  out << "trial_index,variant,initially_feasible,rf_ok,cost,d_min,"
         "max_solve_time\n";
  for (const auto& [variant, trials] : batches) {
    for (std::size_t i = 0; i < trials.size(); ++i) {
      const sim::TrialResult& trial = trials[i];
      out << i << ',' << variant_name(variant) << ','
          << (trial.initially_feasible ? 1 : 0) << ','
          << ((trial.initially_feasible && trial.rf_ok) ? 1 : 0) << ','
          << format_double(trial.closed_loop_cost) << ','
          << format_double(trial.d_min) << ','
          << format_double(modeled_solve_seconds(trial.max_iterations))
          << '\n';
    }
  }
  write_text_file(path, out.str());
}

nlohmann::json summary_json(
    const nlohmann::json& config_echo,
    const std::vector<std::pair<planner::Variant, sim::AggregateMetrics>>&
        aggregates,
    int n_trials) {
  nlohmann::json variants = nlohmann::json::object();
  for (const auto& [variant, agg] : aggregates) {
    variants[variant_name(variant)] = {
        {"n_trials", agg.n_trials},
        {"n_initially_feasible", agg.n_initially_feasible},
        {"n_rf_ok", agg.n_rf_ok},
        {"n_solver_failures", agg.n_solver_failures},
        {"rf_rate", agg.rf_rate},
        {"rf_rate_all_trials", agg.rf_rate_all_trials},
        {"mean_cost", agg.mean_cost},
        {"mean_cost_rf_only", agg.mean_cost_rf_only},
        {"mean_d_min", agg.mean_d_min},
        {"mean_max_solve_time", agg.mean_max_solve_time},
        {"collision_rate", agg.collision_rate},
    };
  }
  return nlohmann::json{{"version", kVersion},
                        {"n_trials", n_trials},
                        {"config", config_echo},
                        {"variants", variants}};
}

void write_fig1_csv(const std::string& path,
                    const std::vector<sim::HorizonStudyRow>& rows) {
  std::ostringstream out;
  out << "T,satisfaction_rate,nominal_rf_rate,prf_rf_rate\n";
  for (const sim::HorizonStudyRow& row : rows) {
    out << row.horizon << ',' << format_double(row.satisfaction_rate) << ','
        << format_double(row.nominal_rf_rate) << ','
        << format_double(row.prf_rf_rate) << '\n';
  }
  write_text_file(path, out.str());
}

void write_trace_csv(const std::string& path, planner::Variant variant,
                     const sim::TrialResult& trial) {
  std::ostringstream out;
  out << "variant,tau,t,feasible,ego_p1,ego_p2,ego_v1,ego_v2,"
         "plan_p1,plan_p2,plan_v1,plan_v2,"
         "ov_mean_x,ov_mean_y,ov_cov_xx,ov_cov_xy,ov_cov_yy,"
         "m_x,m_y,offset,margin\n";
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const sim::StepRecord& step : trial.steps) {
    for (std::size_t k = 0; k < step.halfspaces.size(); ++k) {
      const safety::HalfspaceConstraint& h = step.halfspaces[k];
      const double offset = h.m.dot(h.mu) - h.r * h.m.norm() -
                            h.gamma_t * std::sqrt(h.m.dot(h.sigma * h.m)) -
                            h.margin;
      const Eigen::Vector4d planned =
          step.feasible ? step.planned[k] : Eigen::Vector4d::Constant(nan);
      out << variant_name(variant) << ',' << step.tau << ',' << h.t << ','
          << (step.feasible ? 1 : 0) << ','
          << format_double(step.ego_state[0]) << ','
          << format_double(step.ego_state[1]) << ','
          << format_double(step.ego_state[2]) << ','
          << format_double(step.ego_state[3]) << ','
          << format_double(planned[0]) << ',' << format_double(planned[1])
          << ',' << format_double(planned[2]) << ','
          << format_double(planned[3]) << ',' << format_double(h.mu[0]) << ','
          << format_double(h.mu[1]) << ',' << format_double(h.sigma(0, 0))
          << ',' << format_double(h.sigma(0, 1)) << ','
          << format_double(h.sigma(1, 1)) << ',' << format_double(h.m[0])
          << ',' << format_double(h.m[1]) << ',' << format_double(offset)
          << ',' << format_double(h.margin) << '\n';
    }
  }
  write_text_file(path, out.str());
}

}  // namespace prfmpc::cli
