#include "prfmpc/scenario.hpp"

#include <fstream>

#include "prfmpc/errors.hpp"

namespace prfmpc::cli {

using nlohmann::json;

json default_scenario_json() {
  return json{
      {"scenario_version", 1},
      {"horizon", 9},
      {"dt", 0.5},
      {"epsilon", 0.05},
      {"gamma", 0.1},
      {"safe_radius", 4.0},
      {"input_weight", 1e-4},
      {"ego_init", {0.0, 0.0, 15.0, 0.0}},
      {"ov_init", {-8.0, 3.5}},
      {"ov_nominal_velocity", {15.0, 0.0}},
      {"ov_velocity_cov", {{1.0, 0.0}, {0.0, 0.25}}},
      {"reference",
       {{"lateral_start", 0.0},
        {"lateral_target", 3.5},
        {"station_start", 5.0},
        {"station_end", 27.5},
        {"speed", 15.0},
        {"start_x", 0.0}}},
      {"seed", 20250801},
      {"solver",
       {{"eps_abs", 1e-7}, {"eps_rel", 1e-7}, {"max_iterations", 20000}}},
  };
}

namespace {

void merge_checked(json& base, const json& user, const std::string& prefix) {
  if (!user.is_object()) {
    throw ConfigError("scenario: expected a JSON object at '" +
                      (prefix.empty() ? std::string("<root>") : prefix) + "'");
  }
  for (const auto& [key, value] : user.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (!base.contains(key)) {
      throw ConfigError("scenario: unknown field '" + path + "'");
    }
    if (base[key].is_object()) {
      merge_checked(base[key], value, path);
    } else {
      base[key] = value;
    }
  }
}

double get_number(const json& doc, const std::string& key) {
  if (!doc.at(key).is_number()) {
    throw ConfigError("scenario: field '" + key + "' must be a number");
  }
  return doc.at(key).get<double>();
}

Eigen::VectorXd get_vector(const json& doc, const std::string& key,
                           int expected) {
  const json& node = doc.at(key);
  if (!node.is_array() || static_cast<int>(node.size()) != expected) {
    throw ConfigError("scenario: field '" + key + "' must be an array of " +
                      std::to_string(expected) + " numbers");
  }
  Eigen::VectorXd v(expected);
  for (int i = 0; i < expected; ++i) {
    if (!node[i].is_number()) {
      throw ConfigError("scenario: field '" + key + "' must be numeric");
    }
    v[i] = node[i].get<double>();
  }
  return v;
}

Eigen::Matrix2d get_matrix2(const json& doc, const std::string& key) {
  const json& node = doc.at(key);
  if (!node.is_array() || node.size() != 2) {
    throw ConfigError("scenario: field '" + key + "' must be a 2x2 matrix");
  }
  Eigen::Matrix2d m;
  for (int i = 0; i < 2; ++i) {
    if (!node[i].is_array() || node[i].size() != 2) {
      throw ConfigError("scenario: field '" + key + "' must be a 2x2 matrix");
    }
    for (int j = 0; j < 2; ++j) {
      if (!node[i][j].is_number()) {
        throw ConfigError("scenario: field '" + key + "' must be numeric");
      }
      m(i, j) = node[i][j].get<double>();
    }
  }
  return m;
}

}  // namespace

sim::TrialConfig config_from_json(const json& user) {
  json doc = default_scenario_json();
  merge_checked(doc, user, "");

  if (!doc.at("scenario_version").is_number_integer() ||
      doc.at("scenario_version").get<int>() != 1) {
    throw ConfigError("scenario: unsupported scenario_version");
  }

  sim::TrialConfig cfg;
  if (!doc.at("horizon").is_number_integer()) {
    throw ConfigError("scenario: 'horizon' must be an integer");
  }
  cfg.horizon = doc.at("horizon").get<int>();
  cfg.dt = get_number(doc, "dt");
  cfg.epsilon = get_number(doc, "epsilon");
  cfg.gamma = get_number(doc, "gamma");
  cfg.safe_radius = get_number(doc, "safe_radius");
  cfg.input_weight = get_number(doc, "input_weight");
  cfg.ego_init = get_vector(doc, "ego_init", 4);
  cfg.ov_init = get_vector(doc, "ov_init", 2);
  cfg.ov_nominal_velocity = get_vector(doc, "ov_nominal_velocity", 2);
  cfg.ov_velocity_cov = get_matrix2(doc, "ov_velocity_cov");

  const json& ref = doc.at("reference");
  cfg.reference.lateral_start = get_number(ref, "lateral_start");
  cfg.reference.lateral_target = get_number(ref, "lateral_target");
  cfg.reference.station_start = get_number(ref, "station_start");
  cfg.reference.station_end = get_number(ref, "station_end");
  cfg.reference.speed = get_number(ref, "speed");
  cfg.reference.start_x = get_number(ref, "start_x");

  if (!doc.at("seed").is_number_unsigned() &&
      !doc.at("seed").is_number_integer()) {
    throw ConfigError("scenario: 'seed' must be an integer");
  }
  cfg.seed = doc.at("seed").get<std::uint64_t>();

  const json& solver = doc.at("solver");
  cfg.solver.eps_abs = get_number(solver, "eps_abs");
  cfg.solver.eps_rel = get_number(solver, "eps_rel");
  if (!solver.at("max_iterations").is_number_integer()) {
    throw ConfigError("scenario: 'solver.max_iterations' must be an integer");
  }
  cfg.solver.max_iterations = solver.at("max_iterations").get<int>();

  if (cfg.horizon < 2) throw ConfigError("scenario: horizon must be >= 2");
  if (cfg.dt <= 0.0) throw ConfigError("scenario: dt must be positive");
  if (!(cfg.epsilon > 0.0 && cfg.epsilon < 1.0)) {
    throw ConfigError("scenario: epsilon must lie in (0,1)");
  }
  if (!(cfg.gamma > 0.0 && cfg.gamma < 1.0)) {
    throw ConfigError("scenario: gamma must lie in (0,1)");
  }
  if (cfg.safe_radius <= 0.0) {
    throw ConfigError("scenario: safe_radius must be positive");
  }
  if (cfg.solver.max_iterations < 100) {
    throw ConfigError("scenario: solver.max_iterations must be >= 100");
  }
  return cfg;
}

sim::TrialConfig load_scenario(const std::string& path) {
  if (path.empty()) return config_from_json(json::object());
  std::ifstream file(path);
  if (!file) {
    throw ConfigError("scenario: cannot open config file '" + path + "'");
  }
  json doc;
  try {
    file >> doc;
  } catch (const json::parse_error& e) {
    throw ConfigError("scenario: JSON parse error in '" + path +
                      "': " + e.what());
  }
  return config_from_json(doc);
}

nlohmann::json resolved_json(const sim::TrialConfig& cfg) {
  return json{
      {"scenario_version", 1},
      {"horizon", cfg.horizon},
      {"dt", cfg.dt},
      {"epsilon", cfg.epsilon},
      {"gamma", cfg.gamma},
      {"safe_radius", cfg.safe_radius},
      {"input_weight", cfg.input_weight},
      {"ego_init",
       {cfg.ego_init[0], cfg.ego_init[1], cfg.ego_init[2], cfg.ego_init[3]}},
      {"ov_init", {cfg.ov_init[0], cfg.ov_init[1]}},
      {"ov_nominal_velocity",
       {cfg.ov_nominal_velocity[0], cfg.ov_nominal_velocity[1]}},
      {"ov_velocity_cov",
       {{cfg.ov_velocity_cov(0, 0), cfg.ov_velocity_cov(0, 1)},
        {cfg.ov_velocity_cov(1, 0), cfg.ov_velocity_cov(1, 1)}}},
      {"reference",
       {{"lateral_start", cfg.reference.lateral_start},
        {"lateral_target", cfg.reference.lateral_target},
        {"station_start", cfg.reference.station_start},
        {"station_end", cfg.reference.station_end},
        {"speed", cfg.reference.speed},
        {"start_x", cfg.reference.start_x}}},
      {"seed", cfg.seed},
      {"solver",
       {{"eps_abs", cfg.solver.eps_abs},
        {"eps_rel", cfg.solver.eps_rel},
        {"max_iterations", cfg.solver.max_iterations}}},
  };
}

}  // namespace prfmpc::cli
