#pragma once

// Experiment configuration: JSON file -> validated ExperimentConfig.
// Unknown keys are rejected; parse errors carry line and column.

#include "eqmollify/core.hpp"
#include "eqmollify/mollifier_kernel.hpp"
#include "eqmollify/scenarios.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace eqmollify {

struct ExperimentConfig {
  std::string scenario;
  std::vector<double> epsilons;  // positive, strictly decreasing
  int kernel_level = default_kernel_level;
  int grid = 17;               // lattice points per axis for seminorms, invariance, curvature
  int ray_points = 201;        // curvature samples along the ray for circle actions
  int graph_resolution = 33;   // lattice points per axis for distance graphs
  int torus_nodes = 64;
  int sections_per_point = 8;
  int pairs = 64;
  double pair_separation = 0.3;
  double curvature_delta = 0.05;
  double seminorm_delta = 0.01;
  double dilation_target = 0.02;
  double weak_tolerance = 0.02;
  std::vector<int> k_values{1, 2, 4};
  int epsilon_candidates = 9;
  std::uint64_t seed = 42;
  std::string output_dir = "out";
};

inline constexpr int default_epsilon_steps = 5;

/// eps_max * 2^{-k}, k = 0 .. steps - 1.
inline std::vector<double> halving_schedule(double eps_max, int steps) {
  if (!(eps_max > 0.0)) throw ConfigError("epsilon_max: must be positive");
  if (steps < 1) throw ConfigError("epsilon_steps: must be >= 1");
  std::vector<double> out;
  for (int k = 0; k < steps; ++k) out.push_back(std::ldexp(eps_max, -k));
  return out;
}

namespace detail {

inline std::pair<int, int> line_column(const std::string& text, std::size_t byte) {
  int line = 1, col = 1;
  for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

template <class T>
T get_number(const nlohmann::json& j, const std::string& key) {
  if (!j.is_number()) throw ConfigError("field '" + key + "': expected a number");
  return j.get<T>();
}

inline int get_int(const nlohmann::json& j, const std::string& key, int lo, int hi) {
  if (!j.is_number_integer()) throw ConfigError("field '" + key + "': expected an integer");
  const long long v = j.get<long long>();
  if (v < lo || v > hi)
    throw ConfigError("field '" + key + "': must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  return static_cast<int>(v);
}

inline double get_positive(const nlohmann::json& j, const std::string& key) {
  const double v = get_number<double>(j, key);
  if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError("field '" + key + "': must be positive");
  return v;
}

}  // namespace detail

inline void validate_epsilons(const std::vector<double>& eps) {
  if (eps.empty()) throw ConfigError("field 'epsilons': must not be empty");
  for (std::size_t i = 0; i < eps.size(); ++i) {
    if (!(eps[i] > 0.0) || !std::isfinite(eps[i]))
      throw ConfigError("field 'epsilons': every value must be positive (got " + std::to_string(eps[i]) + ")");
    if (i > 0 && !(eps[i] < eps[i - 1])) throw ConfigError("field 'epsilons': values must be strictly decreasing");
  }
}

/// Parses JSON text; `origin` names the source in error messages.
inline ExperimentConfig parse_config(const std::string& text, const std::string& origin = "<config>") {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    const auto [line, col] = detail::line_column(text, e.byte > 0 ? e.byte - 1 : 0);
    throw ConfigError(origin + ":" + std::to_string(line) + ":" + std::to_string(col) + ": parse error: " + e.what());
  }
  if (!j.is_object()) throw ConfigError(origin + ": top level must be a JSON object");

  static const std::set<std::string> known{
      "scenario",     "epsilons",           "epsilon_max",     "epsilon_steps",   "kernel_level",
      "grid",         "ray_points",         "graph_resolution", "torus_nodes",    "sections_per_point",
      "pairs",        "pair_separation",    "curvature_delta", "seminorm_delta",  "dilation_target",
      "weak_tolerance", "k_values",         "epsilon_candidates", "seed",         "output_dir"};
  for (const auto& [key, value] : j.items())
    if (!known.count(key)) throw ConfigError(origin + ": unknown key '" + key + "'");

  ExperimentConfig c;
  if (!j.contains("scenario") || !j["scenario"].is_string()) throw ConfigError(origin + ": field 'scenario' (string) is required");
  c.scenario = j["scenario"].get<std::string>();
  const auto names = scenario_names();
  if (std::find(names.begin(), names.end(), c.scenario) == names.end()) {
    std::string list;
    for (const auto& n : names) list += (list.empty() ? "" : ", ") + n;
    throw ConfigError(origin + ": unknown scenario '" + c.scenario + "'; available: " + list);
  }

  if (j.contains("epsilons")) {
    if (j.contains("epsilon_max") || j.contains("epsilon_steps"))
      throw ConfigError(origin + ": give either 'epsilons' or 'epsilon_max'/'epsilon_steps', not both");
    if (!j["epsilons"].is_array()) throw ConfigError(origin + ": field 'epsilons': expected an array");
    for (const auto& v : j["epsilons"]) c.epsilons.push_back(detail::get_number<double>(v, "epsilons"));
  } else {
    const double emax = j.contains("epsilon_max") ? detail::get_positive(j["epsilon_max"], "epsilon_max")
                                                  : make_scenario(c.scenario).default_epsilon_max;
    const int steps = j.contains("epsilon_steps") ? detail::get_int(j["epsilon_steps"], "epsilon_steps", 1, 12)
                                                  : default_epsilon_steps;
    c.epsilons = halving_schedule(emax, steps);
  }
  validate_epsilons(c.epsilons);

  if (j.contains("kernel_level")) c.kernel_level = detail::get_int(j["kernel_level"], "kernel_level", 1, 7);
  if (j.contains("grid")) c.grid = detail::get_int(j["grid"], "grid", 3, 257);
  if (j.contains("ray_points")) c.ray_points = detail::get_int(j["ray_points"], "ray_points", 3, 100001);
  if (j.contains("graph_resolution")) c.graph_resolution = detail::get_int(j["graph_resolution"], "graph_resolution", 3, 257);
  if (j.contains("torus_nodes")) c.torus_nodes = detail::get_int(j["torus_nodes"], "torus_nodes", 1, 4096);
  if (j.contains("sections_per_point"))
    c.sections_per_point = detail::get_int(j["sections_per_point"], "sections_per_point", 1, 1000);
  if (j.contains("pairs")) c.pairs = detail::get_int(j["pairs"], "pairs", 1, 100000);
  if (j.contains("pair_separation")) c.pair_separation = detail::get_positive(j["pair_separation"], "pair_separation");
  if (j.contains("curvature_delta")) c.curvature_delta = detail::get_positive(j["curvature_delta"], "curvature_delta");
  if (j.contains("seminorm_delta")) c.seminorm_delta = detail::get_positive(j["seminorm_delta"], "seminorm_delta");
  if (j.contains("dilation_target")) c.dilation_target = detail::get_positive(j["dilation_target"], "dilation_target");
  if (j.contains("weak_tolerance")) c.weak_tolerance = detail::get_positive(j["weak_tolerance"], "weak_tolerance");
  if (j.contains("epsilon_candidates"))
    c.epsilon_candidates = detail::get_int(j["epsilon_candidates"], "epsilon_candidates", 1, 64);
  if (j.contains("k_values")) {
    if (!j["k_values"].is_array() || j["k_values"].empty())
      throw ConfigError(origin + ": field 'k_values': expected a non-empty array");
    c.k_values.clear();
    for (const auto& v : j["k_values"]) c.k_values.push_back(detail::get_int(v, "k_values", 1, 1 << 20));
  }
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) throw ConfigError(origin + ": field 'seed': expected a non-negative integer");
    c.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("output_dir")) {
    if (!j["output_dir"].is_string()) throw ConfigError(origin + ": field 'output_dir': expected a string");
    c.output_dir = j["output_dir"].get<std::string>();
  }
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

/// Defaults for a built-in scenario (what a minimal config yields).
inline ExperimentConfig default_config(const std::string& scenario) {
  return parse_config("{\"scenario\": \"" + scenario + "\"}");
}

}  // namespace eqmollify
