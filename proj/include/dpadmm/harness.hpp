#ifndef DPADMM_HARNESS_HPP
#define DPADMM_HARNESS_HPP

#include <algorithm>
#include <condition_variable>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <numeric>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dpadmm/algorithms.hpp"
#include "dpadmm/costs.hpp"
#include "dpadmm/error.hpp"
#include "dpadmm/graph.hpp"

#ifndef DPADMM_CHECK_LOCALITY
#define DPADMM_CHECK_LOCALITY 1
#endif

namespace dpadmm {

enum class MessageKind { Primal, Dual };

struct Message {
  AgentId from = 0;
  AgentId to = 0;
  MessageKind kind = MessageKind::Primal;
  double value = 0.0;
  std::size_t iteration = 0;
};

/// Fixed set of threads that runs one phase at a time. for_each() returns
/// only after every index has been processed, so each call is a barrier.
class WorkerPool {
 public:
  explicit WorkerPool(std::size_t workers) {
    for (std::size_t w = 1; w < workers; ++w) threads_.emplace_back([this, w] { loop(w); });
  }

  WorkerPool(const WorkerPool&) = delete;
  WorkerPool& operator=(const WorkerPool&) = delete;

  ~WorkerPool() {
    {
      std::lock_guard lock(mu_);
      stop_ = true;
    }
    start_cv_.notify_all();
  }

  std::size_t size() const { return threads_.size() + 1; }

  /// Calls fn(t) for t in [0, count). Index t goes to worker t % size().
  void for_each(std::size_t count, const std::function<void(std::size_t)>& fn) {
    if (threads_.empty()) {
      for (std::size_t t = 0; t < count; ++t) fn(t);
      return;
    }
    {
      std::lock_guard lock(mu_);
      job_ = &fn;
      count_ = count;
      pending_ = threads_.size();
      error_ = nullptr;
      ++generation_;
    }
    start_cv_.notify_all();
    run_share(0, fn, count);
    std::unique_lock lock(mu_);
    done_cv_.wait(lock, [this] { return pending_ == 0; });
    job_ = nullptr;
    if (error_) std::rethrow_exception(error_);
  }

 private:
  void run_share(std::size_t worker, const std::function<void(std::size_t)>& fn, std::size_t count) {
    try {
      for (std::size_t t = worker; t < count; t += size()) fn(t);
    } catch (...) {
      std::lock_guard lock(mu_);
      if (!error_) error_ = std::current_exception();
    }
  }

  void loop(std::size_t worker) {
    std::size_t seen = 0;
    for (;;) {
      const std::function<void(std::size_t)>* job = nullptr;
      std::size_t count = 0;
      {
        std::unique_lock lock(mu_);
        start_cv_.wait(lock, [&] { return stop_ || generation_ != seen; });
        if (stop_) return;
        seen = generation_;
        job = job_;
        count = count_;
      }
      run_share(worker, *job, count);
      {
        std::lock_guard lock(mu_);
        --pending_;
      }
      done_cv_.notify_one();
    }
  }

  std::mutex mu_;
  std::condition_variable start_cv_;
  std::condition_variable done_cv_;
  const std::function<void(std::size_t)>* job_ = nullptr;
  std::size_t count_ = 0;
  std::size_t pending_ = 0;
  std::size_t generation_ = 0;
  bool stop_ = false;
  std::exception_ptr error_;
  std::vector<std::jthread> threads_;  // last member: joined before the rest is destroyed
};

/// Stacked state after iteration k. `lambda` follows the lexicographic edge
/// order and is empty for DSM.
struct IterationRecord {
  std::size_t k = 0;
  Eigen::VectorXd x;
  Eigen::VectorXd lambda;
};

struct IterationTrace {
  Algorithm algorithm = Algorithm::ParallelAdmm;
  RunConfig config;
  std::vector<IterationRecord> records;
  std::set<std::pair<AgentId, AgentId>> links_used;  // every (from, to) that carried a message

  std::size_t executed() const { return records.empty() ? 0 : records.size() - 1; }
  const IterationRecord& last() const { return records.back(); }
};

/// Starting point for a run; defaults to all zeros.
struct InitialState {
  Eigen::VectorXd x;
  Eigen::VectorXd lambda;
};

struct RunOptions {
  std::vector<AgentId> schedule;  // agent visiting order inside a phase; empty = 0..n-1
  std::size_t workers = 1;
  std::optional<InitialState> initial;
  std::function<double(const Eigen::VectorXd&)> stop_metric;  // early stop when < cfg.stop_tolerance
};

/// Round-synchronous simulated network. Agents only see what reaches their
/// mailbox; every send is checked against the topology.
class NetworkSim {
 public:
  NetworkSim(const Topology& topology, std::vector<LocalCost> costs, const RunConfig& cfg)
      : topology_(topology),
        part_(partition_neighbors(topology)),
        costs_(std::move(costs)),
        cfg_(cfg),
        agents_(topology.n()),
        mailboxes_(topology.n()) {
    cfg_.validate();
    if (costs_.size() != topology.n())
      throw Error(ErrorCode::InvalidConfig, "expected " + std::to_string(topology.n()) + " costs, got " +
                                                std::to_string(costs_.size()));
    for (AgentId i = 0; i < topology.n(); ++i) agents_[i].id = i;
  }

  const Topology& topology() const { return topology_; }
  const NeighborPartition& partition() const { return part_; }
  const std::vector<AgentState>& agents() const { return agents_; }
  std::size_t iteration() const { return iteration_; }
  const std::set<std::pair<AgentId, AgentId>>& links_used() const { return links_used_; }

  void initialize(const std::optional<InitialState>& init) {
    const std::size_t n = topology_.n(), m = topology_.m();
    Eigen::VectorXd x0 = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    Eigen::VectorXd l0 = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m));
    if (init) {
      if (static_cast<std::size_t>(init->x.size()) != n)
        throw Error(ErrorCode::InvalidConfig, "initial x has wrong length");
      x0 = init->x;
      if (init->lambda.size() != 0) {
        if (static_cast<std::size_t>(init->lambda.size()) != m)
          throw Error(ErrorCode::InvalidConfig, "initial lambda has wrong length");
        l0 = init->lambda;
      }
    }
    iteration_ = 0;
    for (AgentId i = 0; i < n; ++i) {
      AgentState& a = agents_[i];
      a.x = x0[static_cast<Eigen::Index>(i)];
      a.iteration = 0;
      a.owned_duals.clear();
      a.neighbor_snapshot.clear();
      for (AgentId j : owned_dual_keys(cfg_.algorithm, i, part_)) a.owned_duals[j] = stacked_to_owned(i, j, l0);
    }
    // Round 0 exchange: everyone publishes x^0 and shipped duals.
    for (AgentId i = 0; i < n; ++i) publish_primal(i, part_.neighbors[i]);
    for (AgentId i = 0; i < n; ++i) publish_duals(i);
    deliver_all();
  }

  /// Stacked x and lambda of the current iterate.
  IterationRecord record() const {
    const std::size_t n = topology_.n(), m = topology_.m();
    IterationRecord r;
    r.k = iteration_;
    r.x.resize(static_cast<Eigen::Index>(n));
    for (AgentId i = 0; i < n; ++i) r.x[static_cast<Eigen::Index>(i)] = agents_[i].x;
    if (cfg_.algorithm != Algorithm::Dsm) {
      r.lambda.resize(static_cast<Eigen::Index>(m));
      for (std::size_t e = 0; e < m; ++e) {
        const Edge& edge = topology_.edges()[e];
        const AgentId owner = cfg_.algorithm == Algorithm::SequentialAdmm ? edge.hi : edge.lo;
        const AgentId other = owner == edge.lo ? edge.hi : edge.lo;
        r.lambda[static_cast<Eigen::Index>(e)] = agents_[owner].owned_duals.at(other);
      }
    }
    return r;
  }

  /// Runs one full iteration k -> k+1 of the configured algorithm.
  void step(const std::vector<AgentId>& schedule, WorkerPool& pool) {
    try {
      switch (cfg_.algorithm) {
        case Algorithm::ParallelAdmm: step_parallel(schedule, pool); break;
        case Algorithm::SequentialAdmm: step_sequential(); break;
        case Algorithm::Pjadmm: step_pjadmm(schedule, pool); break;
        case Algorithm::Dsm: step_dsm(schedule, pool); break;
      }
    } catch (const Error& e) {
      if (e.code() == ErrorCode::LocalityViolation) throw;
      throw Error(e.code(), std::string(algorithm_name(cfg_.algorithm)) + " iteration " +
                                std::to_string(iteration_) + ": " + e.what());
    }
    ++iteration_;
  }

  /// Checked send: only along edges, and duals only from the agent that owns them.
  void send(const Message& msg) {
#if DPADMM_CHECK_LOCALITY
    if (msg.to >= topology_.n() || !topology_.adjacent(msg.from, msg.to))
      throw Error(ErrorCode::LocalityViolation, "message " + std::to_string(msg.from + 1) + " -> " +
                                                    std::to_string(msg.to + 1) + " is not along an edge");
    if (msg.kind == MessageKind::Dual && !owns_shipped_dual(msg.from, msg.to))
      throw Error(ErrorCode::LocalityViolation, "agent " + std::to_string(msg.from + 1) +
                                                    " sent a dual it does not own");
#endif
    links_used_.emplace(msg.from, msg.to);
    mailboxes_[msg.to].push_back(msg);
  }

 private:
  // Which agent ships the edge dual in messages: lower endpoint for the
  // parallel ADMM, higher endpoint for sequential ADMM; PJADMM and DSM
  // ship none.
  bool owns_shipped_dual(AgentId from, AgentId to) const {
    switch (cfg_.algorithm) {
      case Algorithm::ParallelAdmm: return from < to;
      case Algorithm::SequentialAdmm: return from > to;
      default: return false;
    }
  }

  double stacked_to_owned(AgentId i, AgentId j, const Eigen::VectorXd& stacked) const {
    const double v = stacked[static_cast<Eigen::Index>(*topology_.edge_index(i, j))];
    // PJADMM: the higher endpoint holds the mirrored dual.
    if (cfg_.algorithm == Algorithm::Pjadmm && i > j) return -v;
    return v;
  }

  void publish_primal(AgentId i, const std::vector<AgentId>& to) {
    for (AgentId j : to) send({i, j, MessageKind::Primal, agents_[i].x, agents_[i].iteration});
  }

  void publish_duals(AgentId i) {
    if (!(cfg_.algorithm == Algorithm::ParallelAdmm || cfg_.algorithm == Algorithm::SequentialAdmm)) return;
    for (const auto& [j, lam] : agents_[i].owned_duals)
      send({i, j, MessageKind::Dual, lam, agents_[i].iteration});
  }

  void deliver(AgentId i) {
    AgentState& a = agents_[i];
    for (const Message& msg : mailboxes_[i]) {
      NeighborView& v = a.neighbor_snapshot[msg.from];
      if (msg.kind == MessageKind::Primal)
        v.x = {msg.value, msg.iteration};
      else
        v.dual = Tagged{msg.value, msg.iteration};
    }
    mailboxes_[i].clear();
  }

  void deliver_all() {
    for (AgentId i = 0; i < topology_.n(); ++i) deliver(i);
  }

  void commit(std::vector<double>& x_next, std::vector<std::map<AgentId, double>>& duals_next) {
    for (AgentId i = 0; i < topology_.n(); ++i) {
      agents_[i].x = x_next[i];
      agents_[i].iteration = iteration_ + 1;
      if (!duals_next.empty()) agents_[i].owned_duals = std::move(duals_next[i]);
    }
  }

  void step_parallel(const std::vector<AgentId>& schedule, WorkerPool& pool) {
    const std::size_t n = topology_.n();
    std::vector<double> x_next(n);
    std::vector<std::map<AgentId, double>> duals_next(n);
    // x-phase: iteration-k data only.
    pool.for_each(n, [&](std::size_t t) {
      const AgentId i = schedule[t];
      x_next[i] = parallel_x_update(agents_[i], costs_[i], part_, cfg_);
    });
    // dual-phase: snapshots still hold x_j^k.
    pool.for_each(n, [&](std::size_t t) {
      const AgentId i = schedule[t];
      duals_next[i] = parallel_dual_update(agents_[i], x_next[i], part_, cfg_);
    });
    // exchange-phase
    commit(x_next, duals_next);
    for (AgentId i : schedule) {
      publish_primal(i, part_.neighbors[i]);
      publish_duals(i);
    }
    deliver_all();
  }

  void step_sequential() {
    const std::size_t n = topology_.n();
    std::vector<double> x_next(n);
    for (AgentId i = 0; i < n; ++i) {
      deliver(i);  // predecessors' x^{k+1}
      x_next[i] = sequential_x_update(agents_[i], costs_[i], part_, cfg_);
      for (AgentId j : part_.successors[i])
        send({i, j, MessageKind::Primal, x_next[i], iteration_ + 1});
    }
    for (AgentId i = 0; i < n; ++i) deliver(i);
    std::vector<std::map<AgentId, double>> duals_next(n);
    for (AgentId i = 0; i < n; ++i)
      duals_next[i] = sequential_dual_update(agents_[i], x_next[i], part_, cfg_);
    commit(x_next, duals_next);
    for (AgentId i = 0; i < n; ++i) {
      publish_primal(i, part_.predecessors[i]);  // successors already have it
      publish_duals(i);
    }
    deliver_all();
  }

  void step_pjadmm(const std::vector<AgentId>& schedule, WorkerPool& pool) {
    const std::size_t n = topology_.n();
    std::vector<double> x_next(n);
    pool.for_each(n, [&](std::size_t t) {
      const AgentId i = schedule[t];
      x_next[i] = pjadmm_x_update(agents_[i], costs_[i], part_, cfg_);
    });
    for (AgentId i : schedule)
      for (AgentId j : part_.neighbors[i]) send({i, j, MessageKind::Primal, x_next[i], iteration_ + 1});
    deliver_all();
    std::vector<std::map<AgentId, double>> duals_next(n);
    pool.for_each(n, [&](std::size_t t) {
      const AgentId i = schedule[t];
      duals_next[i] = pjadmm_dual_update(agents_[i], x_next[i], part_, cfg_);
    });
    commit(x_next, duals_next);
  }

  void step_dsm(const std::vector<AgentId>& schedule, WorkerPool& pool) {
    if (weights_.empty()) weights_ = metropolis_weights(topology_);
    const std::size_t n = topology_.n();
    std::vector<double> x_next(n);
    pool.for_each(n, [&](std::size_t t) {
      const AgentId i = schedule[t];
      x_next[i] = dsm_update(agents_[i], costs_[i], weights_[i], iteration_ + 1, part_, cfg_);
    });
    std::vector<std::map<AgentId, double>> none;
    commit(x_next, none);
    for (AgentId i : schedule) publish_primal(i, part_.neighbors[i]);
    deliver_all();
  }

  Topology topology_;
  NeighborPartition part_;
  std::vector<LocalCost> costs_;
  RunConfig cfg_;
  std::vector<AgentState> agents_;
  std::vector<std::vector<Message>> mailboxes_;
  std::vector<WeightRow> weights_;
  std::set<std::pair<AgentId, AgentId>> links_used_;
  std::size_t iteration_ = 0;
};

namespace detail {

inline std::vector<AgentId> resolve_schedule(const std::vector<AgentId>& schedule, std::size_t n) {
  if (schedule.empty()) {
    std::vector<AgentId> order(n);
    std::iota(order.begin(), order.end(), AgentId{0});
    return order;
  }
  std::vector<AgentId> sorted = schedule;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < n; ++i)
    if (sorted.size() != n || sorted[i] != i)
      throw Error(ErrorCode::InvalidConfig, "schedule must be a permutation of the agents");
  return schedule;
}

inline IterationTrace drive(NetworkSim& sim, const RunConfig& cfg, const RunOptions& options) {
  const auto schedule = resolve_schedule(options.schedule, sim.topology().n());
  WorkerPool pool(std::max<std::size_t>(1, options.workers));
  sim.initialize(options.initial);
  IterationTrace trace;
  trace.algorithm = cfg.algorithm;
  trace.config = cfg;
  trace.records.push_back(sim.record());
  const bool early_stop = cfg.stop_tolerance > 0.0 && options.stop_metric;
  for (std::size_t k = 0; k < cfg.max_iter; ++k) {
    if (early_stop && options.stop_metric(trace.records.back().x) < cfg.stop_tolerance) break;
    sim.step(schedule, pool);
    trace.records.push_back(sim.record());
  }
  trace.links_used = sim.links_used();
  return trace;
}

}  // namespace detail

/// Sequential ADMM: agents always update in index order 1..n within an
/// iteration. Any non-identity schedule is rejected.
inline IterationTrace run_sequential(const RunConfig& cfg, const Topology& topology,
                                     const std::vector<LocalCost>& costs, const RunOptions& options = {}) {
  RunConfig c = cfg;
  c.algorithm = Algorithm::SequentialAdmm;
  const auto schedule = detail::resolve_schedule(options.schedule, topology.n());
  if (!std::is_sorted(schedule.begin(), schedule.end()))
    throw Error(ErrorCode::OrderingViolation, "sequential ADMM must visit agents in index order");
  NetworkSim sim(topology, costs, c);
  RunOptions serial = options;
  serial.workers = 1;
  return detail::drive(sim, c, serial);
}

/// Runs cfg.max_iter iterations (or until the stop metric drops below
/// cfg.stop_tolerance) from zero or options.initial.
inline IterationTrace run(const RunConfig& cfg, const Topology& topology, const std::vector<LocalCost>& costs,
                          const RunOptions& options = {}) {
  if (cfg.algorithm == Algorithm::SequentialAdmm) return run_sequential(cfg, topology, costs, options);
  NetworkSim sim(topology, costs, cfg);
  return detail::drive(sim, cfg, options);
}

/// Per-iteration metric columns appended to a trace CSV.
struct TraceMetrics {
  std::vector<double> residual;
  std::vector<double> cost_gap;
  std::vector<double> consensus_gap;
  std::vector<double> lyapunov;  // may be empty
};

/// `iter,x_1..x_n,lambda_1..lambda_m[,residual,cost_gap,consensus_gap[,V]]`
inline void write_trace_csv(std::ostream& out, const IterationTrace& trace, const TraceMetrics* metrics = nullptr) {
  if (trace.records.empty()) return;
  const auto n = trace.records.front().x.size();
  const auto m = trace.records.front().lambda.size();
  out << "iter";
  for (Eigen::Index i = 1; i <= n; ++i) out << ",x_" << i;
  for (Eigen::Index r = 1; r <= m; ++r) out << ",lambda_" << r;
  const bool with_v = metrics && !metrics->lyapunov.empty();
  if (metrics) out << ",residual,cost_gap,consensus_gap";
  if (with_v) out << ",V";
  out << '\n';
  const auto old_precision = out.precision(17);
  for (std::size_t row = 0; row < trace.records.size(); ++row) {
    const auto& rec = trace.records[row];
    out << rec.k;
    for (Eigen::Index i = 0; i < n; ++i) out << ',' << rec.x[i];
    for (Eigen::Index r = 0; r < m; ++r) out << ',' << rec.lambda[r];
    if (metrics)
      out << ',' << metrics->residual.at(row) << ',' << metrics->cost_gap.at(row) << ','
          << metrics->consensus_gap.at(row);
    if (with_v) out << ',' << metrics->lyapunov.at(row);
    out << '\n';
  }
  out.precision(old_precision);
}

}  // namespace dpadmm

#endif  // DPADMM_HARNESS_HPP
