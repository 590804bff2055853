#ifndef DPADMM_ANALYSIS_HPP
#define DPADMM_ANALYSIS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dpadmm/algorithms.hpp"
#include "dpadmm/costs.hpp"
#include "dpadmm/error.hpp"
#include "dpadmm/graph.hpp"
#include "dpadmm/harness.hpp"

namespace dpadmm {

/// Centralized ground truth for a consensus instance.
struct OracleSolution {
  double x_star = 0.0;
  Eigen::VectorXd x_star_vec;   // x_star * 1
  Eigen::VectorXd lambda_star;  // minimum-norm solution of A^T lambda = g, g_i in df_i(x_star)
  double F_star = 0.0;          // sum_i f_i(x_star)
  double F_star_scaled = 0.0;   // F_star / n
};

inline double global_cost(const Eigen::VectorXd& x, const std::vector<LocalCost>& costs) {
  double F = 0.0;
  for (std::size_t i = 0; i < costs.size(); ++i) F += costs[i].evaluate(x[static_cast<Eigen::Index>(i)]);
  return F;
}

inline double consensual_cost(double x, const std::vector<LocalCost>& costs) {
  double F = 0.0;
  for (const auto& c : costs) F += c.evaluate(x);
  return F;
}

namespace detail {

inline double total_slope(double x, const std::vector<LocalCost>& costs) {
  double g = 0.0;
  for (const auto& c : costs) g += c.subgradient(x);
  return g;
}

inline double minimize_sum(const std::vector<LocalCost>& costs) {
  double a = 0.0, b = 0.0;
  bool all_quadratic = true;
  for (const auto& c : costs) {
    const auto q = c.quadratic();
    if (!q) {
      all_quadratic = false;
      break;
    }
    a += q->a;
    b += q->b;
  }
  if (all_quadratic) {
    if (!(a > 0.0)) throw Error(ErrorCode::SingularInstance, "sum of quadratic curvatures is zero");
    return -b / (2.0 * a);
  }
  // Bisection on the summed subgradient.
  double lo = -1.0, hi = 1.0;
  for (int it = 0; total_slope(lo, costs) > 0.0; ++it) {
    if (it > 200) throw Error(ErrorCode::NoStationaryPoint, "summed slope stays positive");
    lo *= 2.0;
  }
  for (int it = 0; total_slope(hi, costs) < 0.0; ++it) {
    if (it > 200) throw Error(ErrorCode::NoStationaryPoint, "summed slope stays negative");
    hi *= 2.0;
  }
  for (int it = 0; it < 4000; ++it) {
    const double mid = lo + 0.5 * (hi - lo);
    if (mid <= lo || mid >= hi) break;
    const double g = total_slope(mid, costs);
    if (g == 0.0) return mid;
    (g > 0.0 ? hi : lo) = mid;
  }
  return lo + 0.5 * (hi - lo);
}

}  // namespace detail

/// x* by the normal equation when every cost is quadratic, else by
/// bisection on the summed subgradient; lambda* as the minimum-norm
/// solution of A^T lambda = g.
inline OracleSolution solve_centralized(const std::vector<LocalCost>& costs, const Topology& topology) {
  if (costs.size() != topology.n()) throw Error(ErrorCode::InvalidConfig, "cost count differs from node count");
  if (topology.n() < 2) throw Error(ErrorCode::InvalidConfig, "consensus needs at least 2 agents");
  const auto n = static_cast<Eigen::Index>(costs.size());
  OracleSolution s;
  s.x_star = detail::minimize_sum(costs);
  s.x_star_vec = Eigen::VectorXd::Constant(n, s.x_star);

  Eigen::VectorXd g(n);
  for (Eigen::Index i = 0; i < n; ++i) g[i] = costs[static_cast<std::size_t>(i)].subgradient(s.x_star);
  const double imbalance = g.sum();
  const double scale = std::max(1.0, g.cwiseAbs().maxCoeff());
  if (std::abs(imbalance) > 1e-9 * scale) {
    // x* sits on a kink: move the imbalance onto agents whose
    // subdifferential is an interval there.
    const double h = 1e-9 * std::max(1.0, std::abs(s.x_star));
    std::vector<Eigen::Index> kinked;
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& c = costs[static_cast<std::size_t>(i)];
      if (c.subgradient(s.x_star + h) - c.subgradient(s.x_star - h) > 1e-12) kinked.push_back(i);
    }
    if (kinked.empty()) throw Error(ErrorCode::NoStationaryPoint, "subgradients at x* do not sum to zero");
    for (Eigen::Index i : kinked) g[i] -= imbalance / static_cast<double>(kinked.size());
  }
  const IncidenceSet inc = build_incidence(topology);
  const Eigen::MatrixXd At = inc.A.transpose();
  s.lambda_star = At.completeOrthogonalDecomposition().solve(g);
  s.F_star = consensual_cost(s.x_star, costs);
  s.F_star_scaled = s.F_star / static_cast<double>(n);
  return s;
}

/// ||x - x*1|| / ||x*1||, or the absolute error (flagged) when x* = 0.
struct Residual {
  double value = 0.0;
  bool absolute = false;
};

inline Residual residual(const Eigen::VectorXd& x, const OracleSolution& oracle) {
  const double denom = oracle.x_star_vec.norm();
  const double err = (x - oracle.x_star_vec).norm();
  if (denom == 0.0) return {err, true};
  return {err / denom, false};
}

inline double consensus_gap(const Eigen::VectorXd& x, const Topology& topology) {
  double gap = 0.0;
  for (const Edge& e : topology.edges())
    gap = std::max(gap, std::abs(x[static_cast<Eigen::Index>(e.lo)] - x[static_cast<Eigen::Index>(e.hi)]));
  return gap;
}

inline double cost_gap(const Eigen::VectorXd& x, const std::vector<LocalCost>& costs, const OracleSolution& oracle) {
  return global_cost(x, costs) - oracle.F_star;
}

/// How eps1/eps2 enter V and the descent terms. `AsStated` uses
/// (2+eps1), eps2 and eps1, eps2 as written in the descent inequality;
/// `Halved` uses eps/2 in place of eps1 and eps2 throughout (the variant
/// obtained when the per-step inequality carries eps instead of 2 eps).
/// They coincide at eps = 0.
enum class EpsScaling { AsStated, Halved };

namespace detail {

inline std::pair<double, double> scaled_eps(const RunConfig& cfg, EpsScaling scaling) {
  const double f = scaling == EpsScaling::AsStated ? 1.0 : 0.5;
  return {f * cfg.eps1, f * cfg.eps2};
}

}  // namespace detail

/// V = (1/2rho)||lambda - lambda* - rho E x||^2 + (2+eps1) rho ||E(x - x*)||^2
///     + eps2 rho ||B(x - x*)||^2
inline double lyapunov(const Eigen::VectorXd& x, const Eigen::VectorXd& lambda, const OracleSolution& oracle,
                       const IncidenceSet& inc, const RunConfig& cfg, EpsScaling scaling = EpsScaling::AsStated) {
  const auto [e1, e2] = detail::scaled_eps(cfg, scaling);
  const double rho = cfg.rho;
  const Eigen::VectorXd dx = x - oracle.x_star_vec;
  return (lambda - oracle.lambda_star - rho * inc.E * x).squaredNorm() / (2.0 * rho) +
         (2.0 + e1) * rho * (inc.E * dx).squaredNorm() + e2 * rho * (inc.B * dx).squaredNorm();
}

/// V^k - V^{k+1} - (rho/2)||2E(x^{k+1}-x^k) - A x^{k+1}||^2
///   - eps1 rho ||E(x^{k+1}-x^k)||^2 - eps2 rho ||B(x^{k+1}-x^k)||^2
inline double descent_slack(const IterationRecord& prev, const IterationRecord& next, const OracleSolution& oracle,
                            const IncidenceSet& inc, const RunConfig& cfg,
                            EpsScaling scaling = EpsScaling::AsStated) {
  const auto [e1, e2] = detail::scaled_eps(cfg, scaling);
  const double rho = cfg.rho;
  const Eigen::VectorXd d = next.x - prev.x;
  return lyapunov(prev.x, prev.lambda, oracle, inc, cfg, scaling) -
         lyapunov(next.x, next.lambda, oracle, inc, cfg, scaling) -
         0.5 * rho * (2.0 * inc.E * d - inc.A * next.x).squaredNorm() - e1 * rho * (inc.E * d).squaredNorm() -
         e2 * rho * (inc.B * d).squaredNorm();
}

/// Coupling matrix in the per-step optimality inequality. The predecessor
/// sums of the x-update produce E^T A; the A^T E variant is kept so both
/// can be checked side by side (only EtA is valid in general).
enum class CouplingForm { AtE, EtA };

/// Left-hand side of the per-step optimality inequality for the parallel
/// ADMM step prev -> next, evaluated at an arbitrary comparison point x.
/// Non-negative whenever the inequality is valid.
inline double step_inequality_slack(const IterationRecord& prev, const IterationRecord& next, const Eigen::VectorXd& x,
                           const std::vector<LocalCost>& costs, const IncidenceSet& inc, const RunConfig& cfg,
                           CouplingForm form) {
  const double rho = cfg.rho;
  const Eigen::MatrixXd& A = inc.A;
  const Eigen::MatrixXd& B = inc.B;
  const Eigen::MatrixXd& E = inc.E;
  const Eigen::MatrixXd coupling = form == CouplingForm::AtE ? Eigen::MatrixXd(A.transpose() * E)
                                                               : Eigen::MatrixXd(E.transpose() * A);
  const Eigen::MatrixXd EtE = E.transpose() * E;
  const Eigen::MatrixXd BtB = B.transpose() * B;
  const Eigen::VectorXd d = next.x - prev.x;
  const Eigen::VectorXd w = x - next.x;
  const Eigen::VectorXd bracket = -A.transpose() * next.lambda + rho * (4.0 * EtE - coupling) * d +
                                  rho * (2.0 * cfg.eps1 * EtE + 2.0 * cfg.eps2 * BtB) * d;
  return global_cost(x, costs) - global_cost(next.x, costs) + w.dot(bracket) + w.dot(rho * coupling * prev.x);
}

struct ErgodicReport {
  double V0_bar = 0.0;
  std::vector<double> margins;  // margins[s-1] = V0_bar/s - (F(xbar^s) - F*)

  double min_margin() const {
    return margins.empty() ? 0.0 : *std::min_element(margins.begin(), margins.end());
  }
};

/// Ergodic rate check for s = 1..executed: xbar^s = (1/s) sum_{k<s} x^{k+1},
/// V0_bar = (1/2rho)||lambda^0 - rho E x^0||^2 + (2+eps1) rho ||E(x^0-x*)||^2
///          + eps2 rho ||B(x^0-x*)||^2.
inline ErgodicReport ergodic_bound_check(const IterationTrace& trace, const std::vector<LocalCost>& costs,
                                         const OracleSolution& oracle, const IncidenceSet& inc,
                                         const RunConfig& cfg) {
  ErgodicReport rep;
  if (trace.records.size() < 2) return rep;
  const auto& r0 = trace.records.front();
  const double rho = cfg.rho;
  const Eigen::VectorXd dx0 = r0.x - oracle.x_star_vec;
  const Eigen::VectorXd lam0 =
      r0.lambda.size() ? r0.lambda : Eigen::VectorXd(Eigen::VectorXd::Zero(inc.A.rows()));
  rep.V0_bar = (lam0 - rho * inc.E * r0.x).squaredNorm() / (2.0 * rho) +
               (2.0 + cfg.eps1) * rho * (inc.E * dx0).squaredNorm() + cfg.eps2 * rho * (inc.B * dx0).squaredNorm();
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(r0.x.size());
  for (std::size_t s = 1; s < trace.records.size(); ++s) {
    sum += trace.records[s].x;
    const Eigen::VectorXd xbar = sum / static_cast<double>(s);
    rep.margins.push_back(rep.V0_bar / static_cast<double>(s) - (global_cost(xbar, costs) - oracle.F_star));
  }
  return rep;
}

/// Largest violation of the variational-inequality optimality condition at
/// u = (x, lambda) over a finite probe set of u_hat = (x_hat 1, lambda_hat):
///   max_probe -[F(x_hat 1) - F(x) + (u_hat - u)^T Phi(u)],  Phi(u) = (-A^T lambda, A x).
/// Probes: x_hat on a grid around x* (and the mean of x), lambda_hat in
/// {lambda, lambda*, lambda +- Ax}. u_hat = u is among the probes only when
/// x is consensual, so the maximum is clamped at 0.
inline double vi_residual(const Eigen::VectorXd& x, const Eigen::VectorXd& lambda, const std::vector<LocalCost>& costs,
                          const OracleSolution& oracle, const IncidenceSet& inc) {
  const Eigen::VectorXd Ax = inc.A * x;
  const Eigen::VectorXd Atl = inc.A.transpose() * lambda;
  const double Fx = global_cost(x, costs);
  const double span = std::max(1.0, std::abs(oracle.x_star));
  std::vector<double> xs{oracle.x_star, x.mean()};
  for (double t : {1e-3, 1e-2, 1e-1, 0.5, 1.0, 2.0}) {
    xs.push_back(oracle.x_star + t * span);
    xs.push_back(oracle.x_star - t * span);
  }
  std::vector<Eigen::VectorXd> lams{lambda, oracle.lambda_star, lambda + Ax, lambda - Ax};
  double worst = 0.0;
  for (double xh : xs) {
    const Eigen::VectorXd xhat = Eigen::VectorXd::Constant(x.size(), xh);
    const double primal = consensual_cost(xh, costs) - Fx - (xhat - x).dot(Atl);
    for (const auto& lh : lams) worst = std::max(worst, -(primal + (lh - lambda).dot(Ax)));
  }
  return worst;
}

/// Tolerance every certificate is judged against.
inline constexpr double kCertificateTolerance = 1e-9;

struct CertificateRow {
  std::size_t k = 0;
  double V = 0.0;
  double descent_slack = std::numeric_limits<double>::quiet_NaN();  // step k -> k+1; NaN on the last row
  double residual = 0.0;
  double consensus_gap = 0.0;
  double cost_gap = 0.0;
};

struct CertificateReport {
  std::vector<CertificateRow> rows;
  double min_descent_slack = std::numeric_limits<double>::infinity();
  double min_descent_slack_halved = std::numeric_limits<double>::infinity();
  double min_step_inequality_AtE = std::numeric_limits<double>::infinity();
  double min_step_inequality_EtA = std::numeric_limits<double>::infinity();
  ErgodicReport ergodic;
  double final_vi_residual = 0.0;
  bool residual_absolute = false;

  bool descent_pass() const { return min_descent_slack >= -kCertificateTolerance; }
  bool descent_halved_pass() const { return min_descent_slack_halved >= -kCertificateTolerance; }
  bool step_inequality_AtE_pass() const { return min_step_inequality_AtE >= -kCertificateTolerance; }
  bool step_inequality_EtA_pass() const { return min_step_inequality_EtA >= -kCertificateTolerance; }
  bool ergodic_pass() const { return ergodic.min_margin() >= -kCertificateTolerance; }
  bool all_finite() const {
    for (const auto& r : rows)
      if (!std::isfinite(r.V) || !std::isfinite(r.residual) || !std::isfinite(r.consensus_gap) ||
          !std::isfinite(r.cost_gap))
        return false;
    return true;
  }
};

/// Evaluates every certificate over a parallel-ADMM trace. Step-inequality slacks
/// use the comparison point x = x*1.
inline CertificateReport certify(const IterationTrace& trace, const std::vector<LocalCost>& costs,
                                 const Topology& topology, const OracleSolution& oracle) {
  const IncidenceSet inc = build_incidence(topology);
  const RunConfig& cfg = trace.config;
  CertificateReport rep;
  const bool has_duals = trace.algorithm != Algorithm::Dsm;
  for (std::size_t k = 0; k < trace.records.size(); ++k) {
    const auto& rec = trace.records[k];
    CertificateRow row;
    row.k = rec.k;
    const Residual res = residual(rec.x, oracle);
    row.residual = res.value;
    rep.residual_absolute = res.absolute;
    row.consensus_gap = consensus_gap(rec.x, topology);
    row.cost_gap = cost_gap(rec.x, costs, oracle);
    row.V = has_duals ? lyapunov(rec.x, rec.lambda, oracle, inc, cfg) : std::numeric_limits<double>::quiet_NaN();
    if (has_duals && k + 1 < trace.records.size()) {
      const auto& nxt = trace.records[k + 1];
      row.descent_slack = descent_slack(rec, nxt, oracle, inc, cfg);
      rep.min_descent_slack = std::min(rep.min_descent_slack, row.descent_slack);
      rep.min_descent_slack_halved =
          std::min(rep.min_descent_slack_halved, descent_slack(rec, nxt, oracle, inc, cfg, EpsScaling::Halved));
      rep.min_step_inequality_AtE = std::min(
          rep.min_step_inequality_AtE, step_inequality_slack(rec, nxt, oracle.x_star_vec, costs, inc, cfg, CouplingForm::AtE));
      rep.min_step_inequality_EtA =
          std::min(rep.min_step_inequality_EtA,
                   step_inequality_slack(rec, nxt, oracle.x_star_vec, costs, inc, cfg, CouplingForm::EtA));
    }
    rep.rows.push_back(row);
  }
  if (has_duals) {
    rep.ergodic = ergodic_bound_check(trace, costs, oracle, inc, cfg);
    rep.final_vi_residual = vi_residual(trace.last().x, trace.last().lambda, costs, oracle, inc);
  }
  return rep;
}

/// `k,V,descent_slack,residual,consensus_gap,cost_gap` rows followed by a
/// `# summary` block of `certificate,status,value` lines.
inline void write_certificate_csv(std::ostream& out, const CertificateReport& rep) {
  const auto old_precision = out.precision(17);
  out << "k,V,descent_slack,residual,consensus_gap,cost_gap\n";
  for (const auto& r : rep.rows) {
    out << r.k << ',' << r.V << ',';
    if (std::isfinite(r.descent_slack)) out << r.descent_slack;
    out << ',' << r.residual << ',' << r.consensus_gap << ',' << r.cost_gap << '\n';
  }
  auto status = [](bool ok) { return ok ? "PASS" : "FAIL"; };
  out << "# summary\n";
  out << "# certificate,status,value\n";
  out << "# descent," << status(rep.descent_pass()) << ',' << rep.min_descent_slack << '\n';
  out << "# descent_halved_eps," << status(rep.descent_halved_pass()) << ',' << rep.min_descent_slack_halved << '\n';
  out << "# step_inequality_AtE," << status(rep.step_inequality_AtE_pass()) << ',' << rep.min_step_inequality_AtE << '\n';
  out << "# step_inequality_EtA," << status(rep.step_inequality_EtA_pass()) << ',' << rep.min_step_inequality_EtA << '\n';
  out << "# ergodic_bound," << status(rep.ergodic_pass()) << ',' << rep.ergodic.min_margin() << '\n';
  out << "# vi_residual_final,INFO," << rep.final_vi_residual << '\n';
  if (rep.residual_absolute) out << "# residual,INFO,absolute error reported because x* = 0\n";
  out.precision(old_precision);
}

}  // namespace dpadmm

#endif  // DPADMM_ANALYSIS_HPP
