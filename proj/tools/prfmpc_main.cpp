#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "prfmpc/csv.hpp"
#include "prfmpc/errors.hpp"
#include "prfmpc/scenario.hpp"
#include "prfmpc/sim.hpp"
#include "prfmpc/version.hpp"

namespace {

using prfmpc::cli::load_scenario;
using prfmpc::planner::Variant;

constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitSolver = 4;

std::vector<Variant> parse_variants(const std::string& text) {
  if (text == "nominal") return {Variant::nominal};
  if (text == "prf") return {Variant::prf};
  if (text == "both") return {Variant::nominal, Variant::prf};
  throw prfmpc::ConfigError("--variant must be nominal, prf, or both");
}

std::vector<int> parse_horizons(const std::string& text) {
  std::vector<int> horizons;
  const auto push = [&horizons](const std::string& token) {
    const std::size_t dots = token.find("..");
    if (dots != std::string::npos) {
      const int lo = std::stoi(token.substr(0, dots));
      const int hi = std::stoi(token.substr(dots + 2));
      for (int t = lo; t <= hi; ++t) horizons.push_back(t);
    } else {
      horizons.push_back(std::stoi(token));
    }
  };
  std::string rest = text;
  try {
    while (!rest.empty()) {
      const std::size_t comma = rest.find(',');
      push(rest.substr(0, comma));
      if (comma == std::string::npos) break;
      rest = rest.substr(comma + 1);
    }
  } catch (const std::exception&) {
    throw prfmpc::ConfigError("--horizons must look like '2..9' or '2,5,9'");
  }
  if (horizons.empty()) {
    throw prfmpc::ConfigError("--horizons produced an empty set");
  }
  for (const int t : horizons) {
    if (t < 2) throw prfmpc::ConfigError("--horizons entries must be >= 2");
  }
  return horizons;
}

int default_parallelism() {
  if (const char* env = std::getenv("PRFMPC_THREADS")) {
    const int value = std::atoi(env);
    if (value >= 1) return value;
  }
  return 1;
}

void ensure_out_dir(const std::string& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) {
    throw prfmpc::IoError("cannot create output directory '" + out_dir +
                          "': " + ec.message());
  }
}

std::string join_path(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

int cmd_run(const std::string& config_path, const std::string& variant_text,
            int trials, bool seed_set, std::uint64_t seed,
            const std::string& out_dir, int parallel) {
  prfmpc::sim::TrialConfig cfg = load_scenario(config_path);
  if (seed_set) cfg.seed = seed;
  const std::vector<Variant> variants = parse_variants(variant_text);
  ensure_out_dir(out_dir);

  std::vector<std::pair<Variant, std::vector<prfmpc::sim::TrialResult>>>
      batches;
  std::vector<std::pair<Variant, prfmpc::sim::AggregateMetrics>> aggregates;
  int failures = 0;
  for (const Variant variant : variants) {
    std::vector<prfmpc::sim::TrialResult> trials_vec;
    const prfmpc::sim::AggregateMetrics agg = prfmpc::sim::run_batch_collect(
        cfg, trials, variant, parallel, &trials_vec);
    failures += agg.n_solver_failures;
    aggregates.emplace_back(variant, agg);
    batches.emplace_back(variant, std::move(trials_vec));
  }

  prfmpc::cli::write_trials_csv(join_path(out_dir, "trials.csv"), batches);
  const nlohmann::json summary = prfmpc::cli::summary_json(
      prfmpc::cli::resolved_json(cfg), aggregates, trials);
  prfmpc::cli::write_text_file(join_path(out_dir, "summary.json"),
                               summary.dump(2) + "\n");

  const int total = trials * static_cast<int>(variants.size());
  if (failures * 1000 > total) {
    std::cerr << "solver failures in " << failures << " of " << total
              << " trials\n";
    return kExitSolver;
  }
  return 0;
}

int cmd_fig1(const std::string& config_path, const std::string& horizons_text,
             int trials, const std::string& out_dir, int parallel) {
  const prfmpc::sim::TrialConfig cfg = load_scenario(config_path);
  const std::vector<int> horizons = parse_horizons(horizons_text);
  ensure_out_dir(out_dir);
  const std::vector<prfmpc::sim::HorizonStudyRow> rows =
      prfmpc::sim::legacy_condition_study(cfg, horizons, trials, parallel);
  prfmpc::cli::write_fig1_csv(join_path(out_dir, "fig1.csv"), rows);
  return 0;
}

int cmd_trace(const std::string& config_path, bool seed_set,
              std::uint64_t seed, const std::string& out_dir) {
  prfmpc::sim::TrialConfig cfg = load_scenario(config_path);
  if (seed_set) cfg.seed = seed;
  ensure_out_dir(out_dir);
  for (const Variant variant : {Variant::nominal, Variant::prf}) {
    const prfmpc::sim::TrialResult trial = prfmpc::sim::run_trial(cfg, variant);
    const std::string name =
        std::string("trace_") + prfmpc::cli::variant_name(variant) + ".csv";
    prfmpc::cli::write_trace_csv(join_path(out_dir, name), variant, trial);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PRF-MPC lane-change simulator"};
  app.set_version_flag("--version", prfmpc::kVersion);
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "out";
  std::string variant_text = "both";
  std::string horizons_text = "2..9";
  int trials = 1000;
  int fig1_trials = 500;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int parallel = default_parallelism();

  CLI::App* run = app.add_subcommand("run", "Monte Carlo closed-loop batch");
  run->add_option("config", config_path, "scenario JSON (default: embedded)");
  run->add_option("--variant", variant_text, "nominal | prf | both");
  run->add_option("--trials", trials, "number of trials per variant");
  run->add_option("--seed", seed, "override the scenario seed")
      ->each([&seed_set](const std::string&) { seed_set = true; });
  run->add_option("--out", out_dir, "output directory");
  run->add_option("--parallel", parallel, "worker threads");

  CLI::App* fig1 = app.add_subcommand(
      "fig1", "horizon sweep: legacy-condition satisfaction and RF rates");
  fig1->add_option("config", config_path, "scenario JSON (default: embedded)");
  fig1->add_option("--horizons", horizons_text, "e.g. 2..9 or 2,5,9");
  fig1->add_option("--trials", fig1_trials, "trials per horizon");
  fig1->add_option("--out", out_dir, "output directory");
  fig1->add_option("--parallel", parallel, "worker threads");

  CLI::App* trace = app.add_subcommand(
      "trace", "single-trial per-step trace for both variants");
  trace->add_option("config", config_path, "scenario JSON (default: embedded)");
  trace->add_option("--seed", seed, "override the scenario seed")
      ->each([&seed_set](const std::string&) { seed_set = true; });
  trace->add_option("--out", out_dir, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (run->parsed()) {
      return cmd_run(config_path, variant_text, trials, seed_set, seed,
                     out_dir, parallel);
    }
    if (fig1->parsed()) {
      return cmd_fig1(config_path, horizons_text, fig1_trials, out_dir,
                      parallel);
    }
    if (trace->parsed()) {
      return cmd_trace(config_path, seed_set, seed, out_dir);
    }
  } catch (const prfmpc::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const prfmpc::IoError& e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const prfmpc::SolverFailureError& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return kExitSolver;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
