// Acceptance gate: one PASS/FAIL line per criterion.
//   acceptance                 run all, exit 1 if any fail
//   acceptance --criterion N   run criterion N only

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "dpadmm/experiment.hpp"
#include "oracles.hpp"

using namespace dpadmm;

namespace {

constexpr double kSlackTol = 1e-9;

struct Verdict {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string count_str(const std::optional<std::size_t>& k) { return k ? std::to_string(*k) : "never"; }

std::size_t count_or_max(const std::optional<std::size_t>& k) { return k.value_or(SIZE_MAX); }

Problem benchmark(std::uint64_t seed = 42) {
  ExperimentConfig cfg;
  cfg.set_seed(seed);
  return build_problem(cfg);
}

RunConfig parallel_cfg(std::size_t iters) {
  RunConfig c;
  c.max_iter = iters;
  return c;
}

// Graph/instance pairs used by criteria 2 and 3.
struct SweepCase {
  std::uint64_t seed;
  double eps, rho;
};

std::vector<SweepCase> certificate_sweep() {
  std::vector<SweepCase> cases;
  for (std::uint64_t g = 0; g < 50; ++g)
    for (double eps : {0.0, 0.5})
      for (double rho : {0.5, 1.0, 2.0}) cases.push_back({g, eps, rho});
  return cases;
}

struct SweepRun {
  Topology topology;
  std::vector<LocalCost> costs;
  OracleSolution oracle;
  IterationTrace trace;
};

SweepRun run_case(const SweepCase& c, std::size_t iters) {
  const std::size_t n = 3 + c.seed % 10;  // n in 3..12
  Topology t = erdos_renyi(n, 0.4, 1000 + c.seed);
  auto costs = generate_ls_instance(n, 1000 + c.seed).local_costs();
  auto o = solve_centralized(costs, t);
  RunConfig cfg = parallel_cfg(iters);
  cfg.rho = c.rho;
  cfg.eps1 = cfg.eps2 = c.eps;
  auto trace = run(cfg, t, costs);
  return {std::move(t), std::move(costs), std::move(o), std::move(trace)};
}

constexpr std::size_t kSweepIterations = 400;

Verdict criterion1() {
  const Problem p = benchmark();
  const auto t0 = std::chrono::steady_clock::now();
  const IterationTrace trace = run(parallel_cfg(2000), p.topology, p.costs);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const double res = residual(trace.last().x, p.oracle).value;
  const double gap = consensus_gap(trace.last().x, p.topology);
  const auto k6 = iterations_to_threshold(trace, p.oracle, 1e-6);
  const bool ok = res < 1e-6 && gap < 1e-6 && secs < 5.0;
  return {ok, fmt("residual %.3e, consensus gap %.3e after 2000 iterations (residual < 1e-6 first at k=%s), %.3f s",
                  res, gap, count_str(k6).c_str(), secs)};
}

Verdict criterion2() {
  double worst = INFINITY, worst_halved = INFINITY, worst_eta = INFINITY;
  std::size_t failing = 0, failing_halved = 0, runs = 0;
  for (const SweepCase& c : certificate_sweep()) {
    const SweepRun r = run_case(c, kSweepIterations);
    const CertificateReport rep = certify(r.trace, r.costs, r.topology, r.oracle);
    ++runs;
    worst = std::min(worst, rep.min_descent_slack);
    worst_halved = std::min(worst_halved, rep.min_descent_slack_halved);
    worst_eta = std::min(worst_eta, rep.min_step_inequality_EtA);
    failing += !rep.descent_pass();
    failing_halved += !rep.descent_halved_pass();
  }
  return {failing == 0,
          fmt("min descent slack %.3e over %zu runs, %zu runs below -1e-9 (eps/2 scaling: min %.3e, %zu runs "
              "below); per-step E^T A inequality min %.3e",
              worst, runs, failing, worst_halved, failing_halved, worst_eta)};
}

Verdict criterion3() {
  double worst = INFINITY;
  std::size_t failing = 0, runs = 0;
  for (const SweepCase& c : certificate_sweep()) {
    const SweepRun r = run_case(c, kSweepIterations);
    const ErgodicReport rep =
        ergodic_bound_check(r.trace, r.costs, r.oracle, build_incidence(r.topology), r.trace.config);
    ++runs;
    worst = std::min(worst, rep.min_margin());
    failing += rep.min_margin() < -kSlackTol;
  }
  return {failing == 0, fmt("min margin %.3e over %zu runs x %zu values of s, %zu runs below -1e-9", worst, runs,
                            kSweepIterations, failing)};
}

Verdict criterion4() {
  double worst = 0.0;
  std::size_t instances = 0;
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    const std::size_t n = 2 + seed % 11;
    const Topology t = seed % 3 == 0 ? ring_graph(n) : erdos_renyi(n, 0.4, seed);
    std::vector<LocalCost> costs;
    if (seed % 2 == 0) {
      costs = generate_ls_instance(n, seed).local_costs();
    } else {
      std::mt19937_64 gen(seed);
      std::uniform_real_distribution<double> a(0.1, 2.0), b(-3.0, 3.0);
      for (std::size_t i = 0; i < n; ++i) costs.push_back(QuadraticCost{{a(gen), b(gen), 0.0}});
    }
    const OracleSolution o = solve_centralized(costs, t);
    const IterationTrace trace = run(parallel_cfg(6000), t, costs);
    const double rel = (trace.last().x - o.x_star_vec).cwiseAbs().maxCoeff() / std::max(1e-300, std::abs(o.x_star));
    worst = std::max(worst, rel);
    ++instances;
  }
  return {worst <= 1e-8, fmt("worst max_i |x_i - x*| / |x*| = %.3e over %zu quadratic instances", worst, instances)};
}

Verdict criterion5() {
  std::size_t runs = 0, mismatches = 0;
  std::mt19937_64 gen(5);
  for (std::uint64_t seed : {42ull, 1ull, 2ull, 3ull}) {
    const Problem p = benchmark(seed);
    const IterationTrace base = run(parallel_cfg(300), p.topology, p.costs);
    for (int trial = 0; trial < 8; ++trial) {
      RunOptions opt;
      opt.schedule.resize(p.topology.n());
      std::iota(opt.schedule.begin(), opt.schedule.end(), AgentId{0});
      std::shuffle(opt.schedule.begin(), opt.schedule.end(), gen);
      opt.workers = 1 + static_cast<std::size_t>(trial);
      const IterationTrace other = run(parallel_cfg(300), p.topology, p.costs, opt);
      ++runs;
      bool same = other.records.size() == base.records.size();
      for (std::size_t k = 0; same && k < base.records.size(); ++k)
        same = base.records[k].x == other.records[k].x && base.records[k].lambda == other.records[k].lambda;
      mismatches += !same;
    }
  }
  return {mismatches == 0,
          fmt("%zu permuted-schedule runs with 1..8 workers, %zu differ bitwise from the identity/1-worker trace", runs,
              mismatches)};
}

Verdict criterion6() {
  const Topology t = Topology::build(2, {{1, 2}});
  const std::vector<LocalCost> costs{LeastSquaresCost{1.0, 0.0}, LeastSquaresCost{1.0, 2.0}};
  RunConfig cfg;
  cfg.algorithm = Algorithm::SequentialAdmm;
  cfg.max_iter = 10;
  const IterationTrace trace = run(cfg, t, costs);
  oracle::State s{Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(1)};
  double err = 0.0;
  for (std::size_t k = 1; k <= 10; ++k) {
    s = oracle::sequential_step(s, {2, {{0, 1}}}, {{0.5, 0.0}, {0.5, -2.0}}, 1.0);
    err = std::max({err, (trace.records[k].x - s.x).cwiseAbs().maxCoeff(),
                    (trace.records[k].lambda - s.lambda).cwiseAbs().maxCoeff()});
  }
  Eigen::MatrixXd four_node(5, 4);
  four_node << 1, -1, 0, 0, 1, 0, -1, 0, 1, 0, 0, -1, 0, 1, 0, -1, 0, 0, 1, -1;
  const bool exact = build_incidence(Topology::build(4, {{1, 2}, {1, 3}, {1, 4}, {2, 4}, {3, 4}})).A == four_node;
  return {err <= 1e-9 && exact, fmt("10-iteration trace max deviation %.3e from the straight-line oracle; 4-node "
                                    "incidence matrix %s",
                                    err, exact ? "exact" : "MISMATCH")};
}

Verdict criterion7() {
  const Problem p = benchmark();
  std::string detail;
  bool ok = true;
  for (Algorithm a : kAllAlgorithms) {
    RunConfig cfg;
    cfg.algorithm = a;
    cfg.max_iter = 1;
    RunOptions opt;
    opt.initial = InitialState{p.oracle.x_star_vec, p.oracle.lambda_star};
    const IterationTrace trace = run(cfg, p.topology, p.costs, opt);
    double move = (trace.records[1].x - trace.records[0].x).cwiseAbs().maxCoeff();
    if (a != Algorithm::Dsm)
      move = std::max(move, (trace.records[1].lambda - trace.records[0].lambda).cwiseAbs().maxCoeff());
    const bool fixed = move <= 1e-9;
    ok = ok && fixed;
    detail += fmt("%s%s %.3e (%s)", detail.empty() ? "" : ", ", std::string(algorithm_name(a)).c_str(), move,
                  fixed ? "fixed" : "moves");
  }
  return {ok, "max coordinate change after one step: " + detail};
}

Verdict criterion8() {
  ExperimentConfig cfg;
  cfg.max_iter = 5000;
  const Problem p = build_problem(cfg);
  auto iters = [&](Algorithm a) {
    return iterations_to_threshold(run_algorithm(cfg, p, a), p.oracle, 1e-4);
  };
  const auto par = iters(Algorithm::ParallelAdmm);
  const auto dsm = iters(Algorithm::Dsm);
  const auto pj = iters(Algorithm::Pjadmm);
  const bool ok = par.has_value() && count_or_max(par) <= count_or_max(dsm);
  return {ok, fmt("iterations to residual 1e-4 within 5000: parallel-admm %s, dsm %s; pjadmm %s (reported, %s "
                  "parallel-admm)",
                  count_str(par).c_str(), count_str(dsm).c_str(), count_str(pj).c_str(),
                  count_or_max(pj) < count_or_max(par) ? "faster than" : "not faster than")};
}

Verdict criterion9() {
  ExperimentConfig cfg;
  cfg.max_iter = 5000;
  const std::vector<double> eps{0.0, 1.0, 5.0};
  const auto rows = sweep_eps(cfg, build_problem(cfg), eps);
  std::string detail = "seed 42:";
  for (const auto& r : rows) detail += fmt(" eps=%g -> %s", r.eps, count_str(r.iterations_to_threshold).c_str());
  if (nondecreasing(rows)) return {true, detail + " (nondecreasing)"};

  // fallback: median over 10 seeds
  std::vector<std::vector<std::size_t>> per_eps(eps.size());
  for (std::uint64_t seed = 42; seed < 52; ++seed) {
    ExperimentConfig c = cfg;
    c.set_seed(seed);
    const auto r = sweep_eps(c, build_problem(c), eps);
    for (std::size_t e = 0; e < eps.size(); ++e) per_eps[e].push_back(count_or_max(r[e].iterations_to_threshold));
  }
  std::vector<SweepRow> medians;
  detail += " (not monotone); median over seeds 42..51:";
  for (std::size_t e = 0; e < eps.size(); ++e) {
    auto v = per_eps[e];
    std::nth_element(v.begin(), v.begin() + 5, v.end());
    medians.push_back({eps[e], v[5], 0.0});
    detail += fmt(" eps=%g -> %zu", eps[e], v[5]);
  }
  return {nondecreasing(medians), detail};
}

Verdict criterion10() {
  std::size_t bad = 0;
  for (std::uint64_t seed = 0; seed < 500; ++seed) {
    const std::size_t n = 2 + seed % 14;
    const Topology t = erdos_renyi(n, 0.2 + 0.6 * static_cast<double>(seed % 7) / 6.0, 5000 + seed);
    const IncidenceSet inc = build_incidence(t);
    const NeighborPartition part = partition_neighbors(t);
    bool ok = inc.A == inc.B + inc.E && inc.B == inc.A.cwiseMax(0.0);
    ok = ok && (inc.A * Eigen::VectorXd::Ones(static_cast<Eigen::Index>(n))).isZero(0.0);
    for (Eigen::Index r = 0; r < inc.A.rows(); ++r)
      ok = ok && inc.A.row(r).sum() == 0.0 && inc.B.row(r).sum() == 1.0 && inc.E.row(r).sum() == -1.0;
    std::size_t np = 0, ns = 0;
    for (std::size_t i = 0; i < n; ++i) {
      np += part.predecessors[i].size();
      ns += part.successors[i].size();
      ok = ok && part.predecessors[i].size() + part.successors[i].size() == part.neighbors[i].size();
    }
    ok = ok && np == t.m() && ns == t.m();
    bad += !ok;
  }
  return {bad == 0, fmt("500 random connected graphs (n 2..15), %zu violate A=B+E, row sums, A1=0 or "
                        "sum|P|=sum|S|=m",
                        bad)};
}

const std::vector<std::pair<const char*, std::function<Verdict()>>> kCriteria{
    {"convergence", criterion1},         {"descent certificate", criterion2}, {"rate certificate", criterion3},
    {"oracle equivalence", criterion4},  {"order independence", criterion5},  {"sequential fidelity", criterion6},
    {"fixed point", criterion7},         {"parallel vs dsm", criterion8},     {"eps sensitivity", criterion9},
    {"structural invariants", criterion10}};

bool report(std::size_t idx) {
  Verdict v{false, ""};
  try {
    v = kCriteria[idx].second();
  } catch (const std::exception& e) {
    v = {false, std::string("exception: ") + e.what()};
  }
  std::printf("criterion %zu %-22s %s  %s\n", idx + 1, kCriteria[idx].first, v.pass ? "PASS" : "FAIL",
              v.detail.c_str());
  std::fflush(stdout);
  return v.pass;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc == 3 && std::strcmp(argv[1], "--criterion") == 0) {
    const long c = std::strtol(argv[2], nullptr, 10);
    if (c < 1 || c > static_cast<long>(kCriteria.size())) {
      std::fprintf(stderr, "criterion must be 1..%zu\n", kCriteria.size());
      return 2;
    }
    return report(static_cast<std::size_t>(c - 1)) ? 0 : 1;
  }
  if (argc != 1) {
    std::fprintf(stderr, "usage: %s [--criterion N]\n", argv[0]);
    return 2;
  }
  bool all = true;
  for (std::size_t i = 0; i < kCriteria.size(); ++i) all = report(i) && all;
  return all ? 0 : 1;
}
