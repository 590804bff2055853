#ifndef DPADMM_CONFIG_HPP
#define DPADMM_CONFIG_HPP

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "dpadmm/algorithms.hpp"
#include "dpadmm/error.hpp"

namespace dpadmm {

// Experiment configuration, stored as JSON:
//
// {
//   "graph":      {"generator": "erdos-renyi", "n": 9, "p": 0.4, "seed": 42}
//              or {"generator": "explicit", "n": 4, "edges": [[1,2],[1,3]]}
//              or {"generator": "path" | "ring" | "complete", "n": 9},
//   "instance":   {"seed": 42}  or  {"file": "instance.json"},
//   "algorithms": ["parallel-admm", "sequential-admm", "pjadmm", "dsm"],
//   "rho": 1.0, "eps1": 0.0, "eps2": 0.0,
//   "max_iter": 1000, "stop_tolerance": 0.0, "subproblem_tol": 1e-12,
//   "threshold": 1e-4,
//   "dsm_stepsize": {"scale": 1.0, "exponent": 0.5},
//   "eps_values": [0, 1, 5],
//   "workers": 1,
//   "out_dir": "out",
//   "certificates": true
// }
//
// Agent ids are 1-based. Every key is optional; unknown keys are rejected.

struct GraphSpec {
  std::string generator = "erdos-renyi";
  std::size_t n = 9;
  double p = 0.4;
  std::uint64_t seed = 42;
  std::vector<std::pair<std::size_t, std::size_t>> edges;

  friend bool operator==(const GraphSpec&, const GraphSpec&) = default;
};

struct InstanceSpec {
  std::uint64_t seed = 42;
  std::string file;  // non-empty: replay from file instead of generating

  friend bool operator==(const InstanceSpec&, const InstanceSpec&) = default;
};

struct ExperimentConfig {
  GraphSpec graph;
  InstanceSpec instance;
  std::vector<Algorithm> algorithms{std::begin(kAllAlgorithms), std::end(kAllAlgorithms)};
  double rho = 1.0;
  double eps1 = 0.0;
  double eps2 = 0.0;
  std::size_t max_iter = 1000;
  double stop_tolerance = 0.0;
  double subproblem_tol = 1e-12;
  double threshold = 1e-4;
  DsmStepsize dsm_stepsize;
  std::vector<double> eps_values{0.0, 1.0, 5.0};
  std::size_t workers = 1;
  std::string out_dir = "out";
  bool certificates = true;

  RunConfig run_config(Algorithm a) const {
    RunConfig c;
    c.algorithm = a;
    c.rho = rho;
    c.eps1 = eps1;
    c.eps2 = eps2;
    c.max_iter = max_iter;
    c.subproblem_tol = subproblem_tol;
    c.stop_tolerance = stop_tolerance;
    c.dsm_stepsize = dsm_stepsize;
    return c;
  }

  /// Replaces both the graph and the instance seed.
  void set_seed(std::uint64_t seed) {
    graph.seed = seed;
    instance.seed = seed;
  }

  void validate() const {
    if (algorithms.empty()) throw Error(ErrorCode::ConfigError, "at least one algorithm is required");
    static const std::set<std::string> kGenerators{"explicit", "path", "ring", "complete", "erdos-renyi"};
    if (!kGenerators.count(graph.generator))
      throw Error(ErrorCode::ConfigError, "unknown graph generator '" + graph.generator + "'");
    if (graph.n < 2) throw Error(ErrorCode::ConfigError, "graph needs n >= 2");
    if (graph.generator == "explicit" && graph.edges.empty())
      throw Error(ErrorCode::ConfigError, "explicit graph needs an edge list");
    if (!(rho > 0.0)) throw Error(ErrorCode::ConfigError, "rho must be positive");
    if (!(eps1 >= 0.0) || !(eps2 >= 0.0)) throw Error(ErrorCode::ConfigError, "eps1/eps2 must be >= 0");
    for (double e : eps_values)
      if (!(e >= 0.0)) throw Error(ErrorCode::ConfigError, "eps values must be >= 0");
    if (!(threshold > 0.0)) throw Error(ErrorCode::ConfigError, "threshold must be positive");
    if (!(subproblem_tol > 0.0)) throw Error(ErrorCode::ConfigError, "subproblem_tol must be positive");
    if (!(stop_tolerance >= 0.0)) throw Error(ErrorCode::ConfigError, "stop_tolerance must be >= 0");
    if (!instance.file.empty() && !std::filesystem::exists(instance.file))
      throw Error(ErrorCode::ConfigError, "instance file not found: " + instance.file);
  }
};

inline nlohmann::json config_to_json(const ExperimentConfig& c) {
  nlohmann::json graph{{"generator", c.graph.generator}, {"n", c.graph.n}};
  if (c.graph.generator == "erdos-renyi") {
    graph["p"] = c.graph.p;
    graph["seed"] = c.graph.seed;
  }
  if (c.graph.generator == "explicit") {
    nlohmann::json edges = nlohmann::json::array();
    for (const auto& [a, b] : c.graph.edges) edges.push_back({a, b});
    graph["edges"] = edges;
  }
  nlohmann::json instance = c.instance.file.empty() ? nlohmann::json{{"seed", c.instance.seed}}
                                                    : nlohmann::json{{"file", c.instance.file}};
  nlohmann::json algorithms = nlohmann::json::array();
  for (Algorithm a : c.algorithms) algorithms.push_back(std::string(algorithm_name(a)));
  return {{"graph", graph},
          {"instance", instance},
          {"algorithms", algorithms},
          {"rho", c.rho},
          {"eps1", c.eps1},
          {"eps2", c.eps2},
          {"max_iter", c.max_iter},
          {"stop_tolerance", c.stop_tolerance},
          {"subproblem_tol", c.subproblem_tol},
          {"threshold", c.threshold},
          {"dsm_stepsize", {{"scale", c.dsm_stepsize.scale}, {"exponent", c.dsm_stepsize.exponent}}},
          {"eps_values", c.eps_values},
          {"workers", c.workers},
          {"out_dir", c.out_dir},
          {"certificates", c.certificates}};
}

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& j, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& [key, value] : j.items())
    if (!allowed.count(key)) throw Error(ErrorCode::ConfigError, "unknown key '" + key + "' in " + where);
}

}  // namespace detail

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  try {
    if (!j.is_object()) throw Error(ErrorCode::ConfigError, "config must be a JSON object");
    detail::reject_unknown_keys(j,
                                {"graph", "instance", "algorithms", "rho", "eps1", "eps2", "max_iter",
                                 "stop_tolerance", "subproblem_tol", "threshold", "dsm_stepsize", "eps_values",
                                 "workers", "out_dir", "certificates"},
                                "config");
    if (j.contains("graph")) {
      const auto& g = j.at("graph");
      detail::reject_unknown_keys(g, {"generator", "n", "p", "seed", "edges"}, "graph");
      c.graph.generator = g.value("generator", g.contains("edges") ? std::string("explicit") : c.graph.generator);
      c.graph.n = g.value("n", c.graph.n);
      c.graph.p = g.value("p", c.graph.p);
      c.graph.seed = g.value("seed", c.graph.seed);
      if (g.contains("edges"))
        for (const auto& e : g.at("edges")) {
          if (!e.is_array() || e.size() != 2) throw Error(ErrorCode::ConfigError, "edges must be [i, j] pairs");
          c.graph.edges.emplace_back(e[0].get<std::size_t>(), e[1].get<std::size_t>());
        }
    }
    if (j.contains("instance")) {
      const auto& inst = j.at("instance");
      detail::reject_unknown_keys(inst, {"seed", "file"}, "instance");
      c.instance.seed = inst.value("seed", c.instance.seed);
      c.instance.file = inst.value("file", std::string());
    }
    if (j.contains("algorithms")) {
      c.algorithms.clear();
      for (const auto& a : j.at("algorithms")) c.algorithms.push_back(parse_algorithm(a.get<std::string>()));
    }
    c.rho = j.value("rho", c.rho);
    c.eps1 = j.value("eps1", c.eps1);
    c.eps2 = j.value("eps2", c.eps2);
    c.max_iter = j.value("max_iter", c.max_iter);
    c.stop_tolerance = j.value("stop_tolerance", c.stop_tolerance);
    c.subproblem_tol = j.value("subproblem_tol", c.subproblem_tol);
    c.threshold = j.value("threshold", c.threshold);
    if (j.contains("dsm_stepsize")) {
      const auto& d = j.at("dsm_stepsize");
      detail::reject_unknown_keys(d, {"scale", "exponent"}, "dsm_stepsize");
      c.dsm_stepsize.scale = d.value("scale", c.dsm_stepsize.scale);
      c.dsm_stepsize.exponent = d.value("exponent", c.dsm_stepsize.exponent);
    }
    if (j.contains("eps_values")) c.eps_values = j.at("eps_values").get<std::vector<double>>();
    c.workers = j.value("workers", c.workers);
    c.out_dir = j.value("out_dir", c.out_dir);
    c.certificates = j.value("certificates", c.certificates);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("malformed config: ") + e.what());
  }
  return c;
}

/// Parses and validates. Relative instance paths resolve against the
/// config file's directory.
inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, "config file not found: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigError, "config file " + path + ": " + e.what());
  }
  ExperimentConfig c = config_from_json(j);
  if (!c.instance.file.empty() && std::filesystem::path(c.instance.file).is_relative())
    c.instance.file = (std::filesystem::path(path).parent_path() / c.instance.file).string();
  c.validate();
  return c;
}

}  // namespace dpadmm

#endif  // DPADMM_CONFIG_HPP
