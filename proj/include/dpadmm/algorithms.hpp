#ifndef DPADMM_ALGORITHMS_HPP
#define DPADMM_ALGORITHMS_HPP

#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dpadmm/costs.hpp"
#include "dpadmm/error.hpp"
#include "dpadmm/graph.hpp"

namespace dpadmm {

enum class Algorithm { ParallelAdmm, SequentialAdmm, Pjadmm, Dsm };

inline constexpr Algorithm kAllAlgorithms[] = {Algorithm::ParallelAdmm, Algorithm::SequentialAdmm,
                                               Algorithm::Pjadmm, Algorithm::Dsm};

constexpr std::string_view algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::ParallelAdmm: return "parallel-admm";
    case Algorithm::SequentialAdmm: return "sequential-admm";
    case Algorithm::Pjadmm: return "pjadmm";
    case Algorithm::Dsm: return "dsm";
  }
  return "unknown";
}

inline Algorithm parse_algorithm(std::string_view name) {
  for (Algorithm a : kAllAlgorithms)
    if (algorithm_name(a) == name) return a;
  throw Error(ErrorCode::ConfigError, "unknown algorithm '" + std::string(name) + "'");
}

/// alpha(k) = scale / k^exponent, k >= 1.
struct DsmStepsize {
  double scale = 1.0;
  double exponent = 0.5;

  double at(std::size_t k) const { return scale / std::pow(static_cast<double>(k), exponent); }
};

struct RunConfig {
  Algorithm algorithm = Algorithm::ParallelAdmm;
  double rho = 1.0;
  double eps1 = 0.0;
  double eps2 = 0.0;
  std::size_t max_iter = 1000;
  double subproblem_tol = 1e-12;
  double stop_tolerance = 0.0;  // 0 runs the full budget
  DsmStepsize dsm_stepsize;

  void validate() const {
    if (!(rho > 0.0) || !std::isfinite(rho)) throw Error(ErrorCode::InvalidConfig, "rho must be positive");
    if (!(eps1 >= 0.0) || !(eps2 >= 0.0)) throw Error(ErrorCode::InvalidConfig, "eps1 and eps2 must be >= 0");
    if (!(subproblem_tol > 0.0)) throw Error(ErrorCode::InvalidConfig, "subproblem_tol must be positive");
    if (!(stop_tolerance >= 0.0)) throw Error(ErrorCode::InvalidConfig, "stop_tolerance must be >= 0");
    if (!(dsm_stepsize.scale > 0.0)) throw Error(ErrorCode::InvalidConfig, "DSM step scale must be positive");
  }
};

/// A value received from a neighbour together with the iteration that produced it.
struct Tagged {
  double value = 0.0;
  std::size_t iteration = 0;
};

struct NeighborView {
  Tagged x;
  std::optional<Tagged> dual;  // the neighbour-owned dual on the shared edge, if this algorithm ships it
};

/// Everything agent i may read when updating. Nothing outside this struct
/// (and the agent's own cost) reaches an update rule.
struct AgentState {
  AgentId id = 0;
  double x = 0.0;
  std::size_t iteration = 0;  // k of `x`
  std::map<AgentId, double> owned_duals;
  std::map<AgentId, NeighborView> neighbor_snapshot;
};

/// Neighbours whose edge dual agent i stores under `algorithm`:
/// S_i for the parallel ADMM, P_i for sequential ADMM, N_i for PJADMM
/// (one directed dual per incident edge), none for DSM.
inline const std::vector<AgentId>& owned_dual_keys(Algorithm algorithm, AgentId i,
                                                   const NeighborPartition& part) {
  static const std::vector<AgentId> kNone;
  switch (algorithm) {
    case Algorithm::ParallelAdmm: return part.successors[i];
    case Algorithm::SequentialAdmm: return part.predecessors[i];
    case Algorithm::Pjadmm: return part.neighbors[i];
    case Algorithm::Dsm: return kNone;
  }
  return kNone;
}

/// Throws unless the state's duals and snapshot match the layout `algorithm` requires.
inline void check_state_layout(const AgentState& s, Algorithm algorithm, const NeighborPartition& part) {
  const auto& keys = owned_dual_keys(algorithm, s.id, part);
  bool ok = s.owned_duals.size() == keys.size();
  for (AgentId j : keys) ok = ok && s.owned_duals.count(j) == 1;
  if (!ok) throw Error(ErrorCode::LocalityViolation, "owned duals do not match the ownership rule");
  const auto& nbrs = part.neighbors[s.id];
  ok = s.neighbor_snapshot.size() == nbrs.size();
  for (AgentId j : nbrs) ok = ok && s.neighbor_snapshot.count(j) == 1;
  if (!ok) throw Error(ErrorCode::LocalityViolation, "snapshot does not cover exactly N_i");
}

namespace detail {

inline const NeighborView& view(const AgentState& s, AgentId j) {
  const auto it = s.neighbor_snapshot.find(j);
  if (it == s.neighbor_snapshot.end())
    throw Error(ErrorCode::LocalityViolation,
                "agent " + std::to_string(s.id + 1) + " has no snapshot of " + std::to_string(j + 1));
  return it->second;
}

inline double owned(const AgentState& s, AgentId j) {
  const auto it = s.owned_duals.find(j);
  if (it == s.owned_duals.end())
    throw Error(ErrorCode::LocalityViolation,
                "agent " + std::to_string(s.id + 1) + " does not own the dual shared with " +
                    std::to_string(j + 1));
  return it->second;
}

inline double neighbor_x(const AgentState& s, AgentId j, std::size_t expected_iteration) {
  const Tagged& t = view(s, j).x;
  if (t.iteration != expected_iteration)
    throw Error(ErrorCode::OrderingViolation,
                "agent " + std::to_string(s.id + 1) + " needs x_" + std::to_string(j + 1) + " of iteration " +
                    std::to_string(expected_iteration) + ", holds iteration " + std::to_string(t.iteration));
  return t.value;
}

inline double neighbor_dual(const AgentState& s, AgentId j, std::size_t expected_iteration) {
  const auto& d = view(s, j).dual;
  if (!d)
    throw Error(ErrorCode::LocalityViolation,
                "agent " + std::to_string(s.id + 1) + " has not received the dual from " + std::to_string(j + 1));
  if (d->iteration != expected_iteration)
    throw Error(ErrorCode::OrderingViolation, "stale dual from agent " + std::to_string(j + 1));
  return d->value;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Proposed parallel ADMM. Reads only iteration-k data.

inline ScalarSubproblem parallel_subproblem(const AgentState& s, const LocalCost& cost,
                                            const NeighborPartition& part, const RunConfig& cfg) {
  const AgentId i = s.id;
  const std::size_t k = s.iteration;
  const auto& P = part.predecessors[i];
  const auto& S = part.successors[i];
  const double rho = cfg.rho;

  ScalarSubproblem p{cost, 0.0, {}};
  double pred_x_sum = 0.0;
  for (AgentId j : P) {
    p.linear += detail::neighbor_dual(s, j, k);
    pred_x_sum += detail::neighbor_x(s, j, k);
  }
  for (AgentId j : S) p.linear -= detail::owned(s, j);
  p.linear -= rho * (pred_x_sum - static_cast<double>(P.size()) * s.x);

  for (AgentId j : part.neighbors[i]) p.anchors.push_back({0.5 * rho, detail::neighbor_x(s, j, k)});
  if (!P.empty()) p.anchors.push_back({(1.0 + cfg.eps1) * rho * static_cast<double>(P.size()), s.x});
  if (cfg.eps2 > 0.0 && !S.empty()) p.anchors.push_back({cfg.eps2 * rho * static_cast<double>(S.size()), s.x});
  return p;
}

inline double parallel_x_update(const AgentState& s, const LocalCost& cost, const NeighborPartition& part,
                                const RunConfig& cfg) {
  return solve_subproblem(parallel_subproblem(s, cost, part, cfg), cfg.subproblem_tol);
}

/// lambda_ij <- lambda_ij - rho (x_i^{k+1} - x_j^k) for j in S_i. The
/// snapshot must still hold iteration-k neighbour values.
inline std::map<AgentId, double> parallel_dual_update(const AgentState& s, double x_next,
                                                      const NeighborPartition& part, const RunConfig& cfg) {
  std::map<AgentId, double> next;
  for (AgentId j : part.successors[s.id])
    next[j] = detail::owned(s, j) - cfg.rho * (x_next - detail::neighbor_x(s, j, s.iteration));
  return next;
}

// ---------------------------------------------------------------------------
// Sequential (Gauss-Seidel) ADMM baseline. Predecessors must already hold
// iteration k+1.

inline ScalarSubproblem sequential_subproblem(const AgentState& s, const LocalCost& cost,
                                              const NeighborPartition& part, const RunConfig& cfg) {
  const AgentId i = s.id;
  const std::size_t k = s.iteration;
  const double rho = cfg.rho;
  ScalarSubproblem p{cost, 0.0, {}};
  // (rho/2)(x_j^{k+1} - x - lambda_ji/rho)^2 for j in P_i
  for (AgentId j : part.predecessors[i])
    p.anchors.push_back({0.5 * rho, detail::neighbor_x(s, j, k + 1) - detail::owned(s, j) / rho});
  // (rho/2)(x - x_j^k - lambda_ij/rho)^2 for j in S_i
  for (AgentId j : part.successors[i])
    p.anchors.push_back({0.5 * rho, detail::neighbor_x(s, j, k) + detail::neighbor_dual(s, j, k) / rho});
  return p;
}

inline double sequential_x_update(const AgentState& s, const LocalCost& cost, const NeighborPartition& part,
                                  const RunConfig& cfg) {
  return solve_subproblem(sequential_subproblem(s, cost, part, cfg), cfg.subproblem_tol);
}

/// lambda_ji <- lambda_ji - rho (x_j^{k+1} - x_i^{k+1}) for j in P_i.
inline std::map<AgentId, double> sequential_dual_update(const AgentState& s, double x_next,
                                                        const NeighborPartition& part, const RunConfig& cfg) {
  std::map<AgentId, double> next;
  for (AgentId j : part.predecessors[s.id])
    next[j] = detail::owned(s, j) - cfg.rho * (detail::neighbor_x(s, j, s.iteration + 1) - x_next);
  return next;
}

// ---------------------------------------------------------------------------
// Proximal Jacobian ADMM baseline, one directed dual per incident edge.

inline ScalarSubproblem pjadmm_subproblem(const AgentState& s, const LocalCost& cost,
                                          const NeighborPartition& part, const RunConfig& cfg) {
  ScalarSubproblem p{cost, 0.0, {{0.5, s.x}}};
  for (AgentId j : part.neighbors[s.id]) {
    p.linear -= detail::owned(s, j);
    p.anchors.push_back({0.5 * cfg.rho, detail::neighbor_x(s, j, s.iteration)});
  }
  return p;
}

inline double pjadmm_x_update(const AgentState& s, const LocalCost& cost, const NeighborPartition& part,
                              const RunConfig& cfg) {
  return solve_subproblem(pjadmm_subproblem(s, cost, part, cfg), cfg.subproblem_tol);
}

/// lambda_ij <- lambda_ij - rho (x_i^{k+1} - x_j^{k+1}); runs after every
/// agent has published x^{k+1}.
inline std::map<AgentId, double> pjadmm_dual_update(const AgentState& s, double x_next,
                                                    const NeighborPartition& part, const RunConfig& cfg) {
  std::map<AgentId, double> next;
  for (AgentId j : part.neighbors[s.id])
    next[j] = detail::owned(s, j) - cfg.rho * (x_next - detail::neighbor_x(s, j, s.iteration + 1));
  return next;
}

// ---------------------------------------------------------------------------
// Distributed subgradient method.

struct WeightRow {
  double self = 1.0;
  std::map<AgentId, double> neighbors;
};

/// Metropolis-Hastings weights: a_ij = 1 / (1 + max(d_i, d_j)) on edges,
/// self weight takes the remainder.
inline std::vector<WeightRow> metropolis_weights(const Topology& t) {
  std::vector<std::size_t> degree(t.n(), 0);
  for (const Edge& e : t.edges()) {
    ++degree[e.lo];
    ++degree[e.hi];
  }
  std::vector<WeightRow> rows(t.n());
  for (const Edge& e : t.edges()) {
    const double w = 1.0 / (1.0 + static_cast<double>(std::max(degree[e.lo], degree[e.hi])));
    rows[e.lo].neighbors[e.hi] = w;
    rows[e.hi].neighbors[e.lo] = w;
  }
  for (auto& row : rows) {
    double sum = 0.0;
    for (const auto& [j, w] : row.neighbors) sum += w;
    row.self = 1.0 - sum;
  }
  return rows;
}

inline void validate_weight_row(const WeightRow& row, AgentId i, const NeighborPartition& part) {
  constexpr double kTol = 1e-12;
  double sum = row.self;
  bool ok = row.self >= 0.0;
  for (const auto& [j, w] : row.neighbors) {
    ok = ok && w >= 0.0 && std::binary_search(part.neighbors[i].begin(), part.neighbors[i].end(), j);
    sum += w;
  }
  if (!ok || std::abs(sum - 1.0) > kTol)
    throw Error(ErrorCode::BadWeights, "weight row of agent " + std::to_string(i + 1) +
                                           " is not stochastic on N_i and i");
}

/// x_i^{k+1} = sum_j a_ij x_j^k - alpha(k) d_i(x_i^k), with k >= 1.
inline double dsm_update(const AgentState& s, const LocalCost& cost, const WeightRow& row, std::size_t k,
                         const NeighborPartition& part, const RunConfig& cfg) {
  validate_weight_row(row, s.id, part);
  if (k == 0) throw Error(ErrorCode::InvalidConfig, "DSM iteration counter starts at 1");
  double mix = row.self * s.x;
  for (const auto& [j, w] : row.neighbors) mix += w * detail::neighbor_x(s, j, s.iteration);
  return mix - cfg.dsm_stepsize.at(k) * cost.subgradient(s.x);
}

}  // namespace dpadmm

#endif  // DPADMM_ALGORITHMS_HPP
