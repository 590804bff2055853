#ifndef DPADMM_GRAPH_HPP
#define DPADMM_GRAPH_HPP

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dpadmm/error.hpp"
#include "dpadmm/rng.hpp"

namespace dpadmm {

using AgentId = std::size_t;  // 0-based internally; 1-based in files and logs

/// Edge between two agents with lo < hi.
struct Edge {
  AgentId lo = 0;
  AgentId hi = 0;

  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// Connected undirected simple graph whose edges are kept in ascending
/// lexicographic order. Edge r of edges() is row r of the incidence
/// matrix and entry r of every stacked dual vector.
class Topology {
 public:
  /// `edge_list` uses 1-based agent ids, in any order and orientation.
  static Topology build(std::size_t n,
                        const std::vector<std::pair<std::size_t, std::size_t>>& edge_list) {
    if (n == 0) throw Error(ErrorCode::IndexOutOfRange, "graph needs at least one node");
    std::vector<Edge> edges;
    edges.reserve(edge_list.size());
    for (const auto& [a, b] : edge_list) {
      if (a < 1 || a > n || b < 1 || b > n) {
        throw Error(ErrorCode::IndexOutOfRange, "edge (" + std::to_string(a) + "," +
                                                    std::to_string(b) + ") outside 1.." +
                                                    std::to_string(n));
      }
      if (a == b) throw Error(ErrorCode::SelfLoop, "self-loop at node " + std::to_string(a));
      edges.push_back(Edge{std::min(a, b) - 1, std::max(a, b) - 1});
    }
    std::sort(edges.begin(), edges.end());
    const auto dup = std::adjacent_find(edges.begin(), edges.end());
    if (dup != edges.end()) {
      throw Error(ErrorCode::DuplicateEdge, "edge (" + std::to_string(dup->lo + 1) + "," +
                                                std::to_string(dup->hi + 1) + ") listed twice");
    }
    Topology t(n, std::move(edges));
    if (!t.is_connected()) throw Error(ErrorCode::Disconnected, "graph is not connected");
    return t;
  }

  std::size_t n() const { return n_; }
  std::size_t m() const { return edges_.size(); }
  const std::vector<Edge>& edges() const { return edges_; }

  /// Row index of edge {a, b} (0-based ids, either orientation).
  std::optional<std::size_t> edge_index(AgentId a, AgentId b) const {
    const Edge key{std::min(a, b), std::max(a, b)};
    const auto it = std::lower_bound(edges_.begin(), edges_.end(), key);
    if (it == edges_.end() || *it != key) return std::nullopt;
    return static_cast<std::size_t>(it - edges_.begin());
  }

  bool adjacent(AgentId a, AgentId b) const { return a != b && edge_index(a, b).has_value(); }

  std::size_t degree(AgentId i) const {
    return static_cast<std::size_t>(std::count_if(
        edges_.begin(), edges_.end(), [i](const Edge& e) { return e.lo == i || e.hi == i; }));
  }

  /// Edge list with 1-based ids, as written to files.
  std::vector<std::pair<std::size_t, std::size_t>> one_based_edges() const {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    out.reserve(edges_.size());
    for (const Edge& e : edges_) out.emplace_back(e.lo + 1, e.hi + 1);
    return out;
  }

 private:
  Topology(std::size_t n, std::vector<Edge> edges) : n_(n), edges_(std::move(edges)) {}

  bool is_connected() const {
    std::vector<std::size_t> parent(n_);
    for (std::size_t i = 0; i < n_; ++i) parent[i] = i;
    auto find = [&](std::size_t v) {
      while (parent[v] != v) v = parent[v] = parent[parent[v]];
      return v;
    };
    std::size_t components = n_;
    for (const Edge& e : edges_) {
      const std::size_t a = find(e.lo), b = find(e.hi);
      if (a != b) {
        parent[a] = b;
        --components;
      }
    }
    return components == 1;
  }

  std::size_t n_;
  std::vector<Edge> edges_;
};

/// N_i, P_i (smaller-index neighbours) and S_i (larger-index neighbours),
/// each sorted ascending.
struct NeighborPartition {
  std::vector<std::vector<AgentId>> neighbors;
  std::vector<std::vector<AgentId>> predecessors;
  std::vector<std::vector<AgentId>> successors;

  std::size_t size() const { return neighbors.size(); }
};

inline NeighborPartition partition_neighbors(const Topology& t) {
  NeighborPartition p;
  p.neighbors.resize(t.n());
  p.predecessors.resize(t.n());
  p.successors.resize(t.n());
  // Edges are sorted by (lo, hi), so pushes arrive in ascending order for
  // successors; predecessors and neighbours get sorted afterwards.
  for (const Edge& e : t.edges()) {
    p.successors[e.lo].push_back(e.hi);
    p.predecessors[e.hi].push_back(e.lo);
    p.neighbors[e.lo].push_back(e.hi);
    p.neighbors[e.hi].push_back(e.lo);
  }
  for (std::size_t i = 0; i < t.n(); ++i) {
    std::sort(p.predecessors[i].begin(), p.predecessors[i].end());
    std::sort(p.neighbors[i].begin(), p.neighbors[i].end());
  }
  return p;
}

/// Edge-node incidence matrix A and its split A = B + E with
/// B = max{0, A} and E = A - B.
struct IncidenceSet {
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;
  Eigen::MatrixXd E;
};

inline IncidenceSet build_incidence(const Topology& t) {
  const auto m = static_cast<Eigen::Index>(t.m());
  const auto n = static_cast<Eigen::Index>(t.n());
  IncidenceSet inc{Eigen::MatrixXd::Zero(m, n), Eigen::MatrixXd::Zero(m, n),
                   Eigen::MatrixXd::Zero(m, n)};
  for (Eigen::Index r = 0; r < m; ++r) {
    const Edge& e = t.edges()[static_cast<std::size_t>(r)];
    inc.A(r, static_cast<Eigen::Index>(e.lo)) = 1.0;
    inc.A(r, static_cast<Eigen::Index>(e.hi)) = -1.0;
  }
  inc.B = inc.A.cwiseMax(0.0);
  inc.E = inc.A - inc.B;
  return inc;
}

// Generators. All return connected topologies; n counts agents.

inline Topology path_graph(std::size_t n) {
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t i = 1; i < n; ++i) edges.emplace_back(i, i + 1);
  return Topology::build(n, edges);
}

inline Topology ring_graph(std::size_t n) {
  if (n < 3) return path_graph(n);
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t i = 1; i < n; ++i) edges.emplace_back(i, i + 1);
  edges.emplace_back(n, 1);
  return Topology::build(n, edges);
}

inline Topology complete_graph(std::size_t n) {
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = i + 1; j <= n; ++j) edges.emplace_back(i, j);
  return Topology::build(n, edges);
}

/// G(n, p) with rejection until connected. Attempt a draws from stream
/// kGraphStreamBase + a of `seed`, so the result depends only on (n, p, seed).
inline Topology erdos_renyi(std::size_t n, double p, std::uint64_t seed,
                            std::size_t max_attempts = 10000) {
  if (!(p > 0.0 && p <= 1.0)) throw Error(ErrorCode::InvalidConfig, "edge probability must lie in (0, 1]");
  for (std::size_t attempt = 0; attempt < max_attempts; ++attempt) {
    Rng rng(seed, kGraphStreamBase + attempt);
    std::vector<std::pair<std::size_t, std::size_t>> edges;
    for (std::size_t i = 1; i <= n; ++i)
      for (std::size_t j = i + 1; j <= n; ++j)
        if (rng.uniform() < p) edges.emplace_back(i, j);
    try {
      return Topology::build(n, edges);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::Disconnected) throw;
    }
  }
  throw Error(ErrorCode::Disconnected, "no connected G(n,p) sample within attempt budget");
}

}  // namespace dpadmm

#endif  // DPADMM_GRAPH_HPP
