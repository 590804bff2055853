#ifndef DPADMM_EXPERIMENT_HPP
#define DPADMM_EXPERIMENT_HPP

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "dpadmm/algorithms.hpp"
#include "dpadmm/analysis.hpp"
#include "dpadmm/config.hpp"
#include "dpadmm/costs.hpp"
#include "dpadmm/error.hpp"
#include "dpadmm/graph.hpp"
#include "dpadmm/harness.hpp"

namespace dpadmm {

/// Topology, instance and oracle shared by every algorithm in an experiment.
struct Problem {
  Topology topology;
  LeastSquaresInstance instance;
  std::vector<LocalCost> costs;
  OracleSolution oracle;
};

inline Topology build_graph(const GraphSpec& g) {
  if (g.generator == "explicit") return Topology::build(g.n, g.edges);
  if (g.generator == "path") return path_graph(g.n);
  if (g.generator == "ring") return ring_graph(g.n);
  if (g.generator == "complete") return complete_graph(g.n);
  if (g.generator == "erdos-renyi") return erdos_renyi(g.n, g.p, g.seed);
  throw Error(ErrorCode::ConfigError, "unknown graph generator '" + g.generator + "'");
}

inline Problem build_problem(const ExperimentConfig& cfg) {
  Topology t = build_graph(cfg.graph);
  LeastSquaresInstance inst =
      cfg.instance.file.empty() ? generate_ls_instance(t.n(), cfg.instance.seed) : load_instance(cfg.instance.file);
  if (inst.size() != t.n())
    throw Error(ErrorCode::ConfigError, "instance has " + std::to_string(inst.size()) + " agents, graph has " +
                                            std::to_string(t.n()));
  auto costs = inst.local_costs();
  OracleSolution oracle = solve_centralized(costs, t);
  return {std::move(t), std::move(inst), std::move(costs), std::move(oracle)};
}

/// First k whose residual drops below `threshold`.
inline std::optional<std::size_t> iterations_to_threshold(const IterationTrace& trace, const OracleSolution& oracle,
                                                          double threshold) {
  for (const auto& rec : trace.records)
    if (residual(rec.x, oracle).value < threshold) return rec.k;
  return std::nullopt;
}

inline IterationTrace run_algorithm(const ExperimentConfig& cfg, const Problem& p, Algorithm a) {
  RunOptions opt;
  opt.workers = a == Algorithm::SequentialAdmm ? 1 : cfg.workers;
  opt.stop_metric = [&p](const Eigen::VectorXd& x) { return residual(x, p.oracle).value; };
  return run(cfg.run_config(a), p.topology, p.costs, opt);
}

inline TraceMetrics trace_metrics(const IterationTrace& trace, const Problem& p) {
  TraceMetrics m;
  const bool with_v = trace.algorithm != Algorithm::Dsm;
  const IncidenceSet inc = build_incidence(p.topology);
  for (const auto& rec : trace.records) {
    m.residual.push_back(residual(rec.x, p.oracle).value);
    m.cost_gap.push_back(cost_gap(rec.x, p.costs, p.oracle));
    m.consensus_gap.push_back(consensus_gap(rec.x, p.topology));
    if (with_v) m.lyapunov.push_back(lyapunov(rec.x, rec.lambda, p.oracle, inc, trace.config));
  }
  return m;
}

struct AlgorithmSummary {
  Algorithm algorithm = Algorithm::ParallelAdmm;
  std::size_t executed = 0;
  double final_residual = 0.0;
  double final_cost_gap = 0.0;
  double final_consensus_gap = 0.0;
  std::optional<std::size_t> iterations_to_threshold;
};

struct RunOutcome {
  std::vector<AlgorithmSummary> summaries;
  std::optional<CertificateReport> certificates;  // parallel-admm only
  std::vector<std::string> written;               // output files
  int exit_code = 0;
};

namespace detail {

inline std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  return out;
}

inline void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create output directory " + dir + ": " + ec.message());
}

inline AlgorithmSummary summarize(const IterationTrace& trace, const Problem& p, double threshold) {
  AlgorithmSummary s;
  s.algorithm = trace.algorithm;
  s.executed = trace.executed();
  s.final_residual = residual(trace.last().x, p.oracle).value;
  s.final_cost_gap = cost_gap(trace.last().x, p.costs, p.oracle);
  s.final_consensus_gap = consensus_gap(trace.last().x, p.topology);
  s.iterations_to_threshold = iterations_to_threshold(trace, p.oracle, threshold);
  return s;
}

inline std::string format_count(const std::optional<std::size_t>& k) { return k ? std::to_string(*k) : "NA"; }

}  // namespace detail

/// `run`: one trace CSV per algorithm, the realized instance, and (with
/// certificates on and parallel-admm selected) a certificate report.
/// exit_code is 1 when `strict` and any parallel-admm certificate fails.
inline RunOutcome cmd_run(const ExperimentConfig& cfg, bool strict, std::ostream& log) {
  cfg.validate();
  const Problem p = build_problem(cfg);
  detail::ensure_dir(cfg.out_dir);
  RunOutcome outcome;
  const std::filesystem::path dir(cfg.out_dir);

  const auto inst_path = (dir / "instance.json").string();
  save_instance(p.instance, inst_path);
  outcome.written.push_back(inst_path);

  log.precision(10);
  log << "n=" << p.topology.n() << " m=" << p.topology.m() << " x*=" << p.oracle.x_star
      << " F(x*)=" << p.oracle.F_star << " (1/n)F(x*)=" << p.oracle.F_star_scaled << '\n';
  for (Algorithm a : cfg.algorithms) {
    const IterationTrace trace = run_algorithm(cfg, p, a);
    const TraceMetrics metrics = trace_metrics(trace, p);
    const auto path = (dir / ("trace_" + std::string(algorithm_name(a)) + ".csv")).string();
    auto out = detail::open_output(path);
    write_trace_csv(out, trace, &metrics);
    outcome.written.push_back(path);

    const AlgorithmSummary s = detail::summarize(trace, p, cfg.threshold);
    outcome.summaries.push_back(s);
    log << algorithm_name(a) << ": iterations=" << s.executed << " residual=" << s.final_residual
        << " F_gap=" << s.final_cost_gap << " consensus_gap=" << s.final_consensus_gap
        << " iterations_to_" << cfg.threshold << "=" << detail::format_count(s.iterations_to_threshold) << '\n';

    if (cfg.certificates && a == Algorithm::ParallelAdmm) {
      CertificateReport rep = certify(trace, p.costs, p.topology, p.oracle);
      const auto cpath = (dir / "certificates.csv").string();
      auto cout_file = detail::open_output(cpath);
      write_certificate_csv(cout_file, rep);
      outcome.written.push_back(cpath);
      log << "certificates: descent=" << (rep.descent_pass() ? "PASS" : "FAIL") << " (min slack "
          << rep.min_descent_slack << ") ergodic=" << (rep.ergodic_pass() ? "PASS" : "FAIL") << " (min margin "
          << rep.ergodic.min_margin() << ") vi_residual=" << rep.final_vi_residual << '\n';
      if (strict && !(rep.descent_pass() && rep.ergodic_pass())) outcome.exit_code = 1;
      outcome.certificates = std::move(rep);
    }
  }
  return outcome;
}

/// `compare`: residual-vs-iteration columns for every configured algorithm
/// on one shared instance, `iter,<alg1>,<alg2>,...`. Shorter traces (early
/// stop) leave their trailing cells empty.
inline RunOutcome cmd_compare(const ExperimentConfig& cfg, std::ostream& log) {
  cfg.validate();
  const Problem p = build_problem(cfg);
  detail::ensure_dir(cfg.out_dir);
  RunOutcome outcome;
  std::vector<std::vector<double>> columns;
  std::size_t rows = 0;
  for (Algorithm a : cfg.algorithms) {
    const IterationTrace trace = run_algorithm(cfg, p, a);
    std::vector<double> col;
    for (const auto& rec : trace.records) col.push_back(residual(rec.x, p.oracle).value);
    rows = std::max(rows, col.size());
    columns.push_back(std::move(col));
    outcome.summaries.push_back(detail::summarize(trace, p, cfg.threshold));
  }
  const auto path = (std::filesystem::path(cfg.out_dir) / "compare.csv").string();
  auto out = detail::open_output(path);
  out.precision(17);
  out << "iter";
  for (Algorithm a : cfg.algorithms) out << ',' << algorithm_name(a);
  out << '\n';
  for (std::size_t r = 0; r < rows; ++r) {
    out << r;
    for (const auto& col : columns) {
      out << ',';
      if (r < col.size()) out << col[r];
    }
    out << '\n';
  }
  outcome.written.push_back(path);
  for (const auto& s : outcome.summaries)
    log << algorithm_name(s.algorithm) << ": iterations_to_" << cfg.threshold << "="
        << detail::format_count(s.iterations_to_threshold) << " final_residual=" << s.final_residual << '\n';
  return outcome;
}

struct SweepRow {
  double eps = 0.0;
  std::optional<std::size_t> iterations_to_threshold;
  double final_residual = 0.0;
};

/// Parallel ADMM with eps1 = eps2 = eps for each value.
inline std::vector<SweepRow> sweep_eps(const ExperimentConfig& cfg, const Problem& p, const std::vector<double>& eps) {
  std::vector<SweepRow> rows;
  for (double e : eps) {
    if (!(e >= 0.0)) throw Error(ErrorCode::ConfigError, "eps values must be >= 0");
    ExperimentConfig c = cfg;
    c.eps1 = c.eps2 = e;
    const IterationTrace trace = run_algorithm(c, p, Algorithm::ParallelAdmm);
    rows.push_back({e, iterations_to_threshold(trace, p.oracle, cfg.threshold),
                    residual(trace.last().x, p.oracle).value});
  }
  return rows;
}

inline bool nondecreasing(const std::vector<SweepRow>& rows) {
  auto count = [](const SweepRow& r) { return r.iterations_to_threshold.value_or(SIZE_MAX); };
  for (std::size_t i = 1; i < rows.size(); ++i)
    if (count(rows[i]) < count(rows[i - 1])) return false;
  return true;
}

/// `sweep-eps`: `eps,iterations_to_threshold,final_residual` plus a
/// `# monotone,<yes|no>` trailer.
inline std::vector<SweepRow> cmd_sweep_eps(const ExperimentConfig& cfg, const std::vector<double>& eps,
                                           std::ostream& log) {
  cfg.validate();
  const Problem p = build_problem(cfg);
  detail::ensure_dir(cfg.out_dir);
  const auto rows = sweep_eps(cfg, p, eps);
  const auto path = (std::filesystem::path(cfg.out_dir) / "sweep_eps.csv").string();
  auto out = detail::open_output(path);
  out.precision(17);
  out << "eps,iterations_to_threshold,final_residual\n";
  for (const auto& r : rows)
    out << r.eps << ',' << detail::format_count(r.iterations_to_threshold) << ',' << r.final_residual << '\n';
  const bool mono = nondecreasing(rows);
  out << "# monotone," << (mono ? "yes" : "no") << '\n';
  for (const auto& r : rows)
    log << "eps=" << r.eps << " iterations_to_" << cfg.threshold << "="
        << detail::format_count(r.iterations_to_threshold) << '\n';
  if (!mono) log << "warning: iterations-to-threshold is not monotone in eps on this instance\n";
  return rows;
}

}  // namespace dpadmm

#endif  // DPADMM_EXPERIMENT_HPP
