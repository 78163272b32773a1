#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "prfmpc/planner.hpp"
#include "prfmpc/sim.hpp"

namespace prfmpc::cli {

/// Locale-independent float text with 17 significant digits, so values
/// round-trip losslessly.
std::string format_double(double v);

const char* variant_name(planner::Variant variant);

/// Seconds of solver work modeled deterministically from the iteration
/// count. trials.csv must be byte-identical across repeated runs, which
/// rules out wall-clock values there; measured timing is reported in
/// summary.json instead.
double modeled_solve_seconds(long iterations);

void write_trials_csv(
    const std::string& path,
    const std::vector<std::pair<planner::Variant,
                                std::vector<sim::TrialResult>>>& batches);

nlohmann::json summary_json(
    const nlohmann::json& config_echo,
    const std::vector<std::pair<planner::Variant, sim::AggregateMetrics>>&
        aggregates,
    int n_trials);

void write_text_file(const std::string& path, const std::string& content);

void write_fig1_csv(const std::string& path,
                    const std::vector<sim::HorizonStudyRow>& rows);

void write_trace_csv(const std::string& path, planner::Variant variant,
                     const sim::TrialResult& trial);

}  // namespace prfmpc::cli
