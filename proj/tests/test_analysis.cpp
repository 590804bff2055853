#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "dpadmm/analysis.hpp"
#include "dpadmm/harness.hpp"

using namespace dpadmm;

namespace {

std::vector<LocalCost> two_node_costs() { return {LeastSquaresCost{1.0, 0.0}, LeastSquaresCost{1.0, 2.0}}; }

Topology two_node() { return Topology::build(2, {{1, 2}}); }

IterationRecord rec(std::size_t k, std::vector<double> x, std::vector<double> l) {
  return {k, Eigen::Map<Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size())),
          Eigen::Map<Eigen::VectorXd>(l.data(), static_cast<Eigen::Index>(l.size()))};
}

}  // namespace

TEST(Oracle, TwoNodeNormalEquation) {
  const auto o = solve_centralized(two_node_costs(), two_node());
  EXPECT_DOUBLE_EQ(o.x_star, 1.0);
  EXPECT_DOUBLE_EQ(o.F_star, 1.0);
  EXPECT_DOUBLE_EQ(o.F_star_scaled, 0.5);
  ASSERT_EQ(o.lambda_star.size(), 1);
  EXPECT_NEAR(o.lambda_star[0], 1.0, 1e-15);  // f_1'(1) = lambda
}

TEST(Oracle, NoiselessInstanceRecoversSignal) {
  const auto inst = generate_ls_instance(9, 31, {.noiseless = true});
  const auto o = solve_centralized(inst.local_costs(), erdos_renyi(9, 0.4, 31));
  EXPECT_NEAR(o.x_star, inst.signal, 1e-14);
}

TEST(Oracle, RejectsDegenerateInput) {
  EXPECT_THROW(solve_centralized({LeastSquaresCost{1.0, 1.0}}, Topology::build(1, {})), Error);
  const std::vector<LocalCost> flat{QuadraticCost{{0.0, 1.0, 0.0}}, QuadraticCost{{0.0, -1.0, 0.0}}};
  try {
    solve_centralized(flat, two_node());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SingularInstance);
  }
}

TEST(Oracle, ConsistencyOnRandomInstances) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const std::size_t n = 2 + seed % 11;
    const Topology t = erdos_renyi(n, 0.45, seed);
    const auto costs = generate_ls_instance(n, seed).local_costs();
    const auto o = solve_centralized(costs, t);
    const auto inc = build_incidence(t);
    double slope = 0.0;
    for (const auto& c : costs) slope += c.subgradient(o.x_star);
    EXPECT_LE(std::abs(slope), 1e-10);
    EXPECT_TRUE((inc.A * o.x_star_vec).isZero(0.0));
    const Eigen::VectorXd Atl = inc.A.transpose() * o.lambda_star;
    for (std::size_t i = 0; i < n; ++i)
      EXPECT_NEAR(costs[i].subgradient(o.x_star), Atl[static_cast<Eigen::Index>(i)], 1e-10);
    // minimum norm: lambda* lies in the row space of A^T
    const Eigen::MatrixXd At = inc.A.transpose();
    const Eigen::VectorXd proj = At.transpose() * At.transpose().completeOrthogonalDecomposition().solve(o.lambda_star);
    EXPECT_LE((proj - o.lambda_star).norm(), 1e-9);
  }
}

TEST(Oracle, NonsmoothMedian) {
  const std::vector<LocalCost> costs{AbsoluteCost{1.0, 0.0}, AbsoluteCost{1.0, 1.0}, AbsoluteCost{1.0, 5.0}};
  const Topology t = path_graph(3);
  const auto o = solve_centralized(costs, t);
  EXPECT_NEAR(o.x_star, 1.0, 1e-9);
  const Eigen::VectorXd g = build_incidence(t).A.transpose() * o.lambda_star;
  EXPECT_NEAR(g.sum(), 0.0, 1e-12);
  const double h = 1e-6;
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_GE(g[static_cast<Eigen::Index>(i)], costs[i].subgradient(o.x_star - h) - 1e-9);
    EXPECT_LE(g[static_cast<Eigen::Index>(i)], costs[i].subgradient(o.x_star + h) + 1e-9);
  }
}

TEST(ResidualMetric, Identities) {
  OracleSolution o;
  o.x_star = -0.4;
  o.x_star_vec = Eigen::VectorXd::Constant(3, -0.4);
  EXPECT_EQ(residual(o.x_star_vec, o).value, 0.0);
  EXPECT_NEAR(residual(2.0 * o.x_star_vec, o).value, 1.0, 1e-15);
  for (double c : {-3.0, 0.0, 0.25, 7.0}) EXPECT_NEAR(residual(c * o.x_star_vec, o).value, std::abs(c - 1.0), 1e-14);
  // ||(0, -0.4, 0.2) - (-0.4,-0.4,-0.4)|| / (0.4 sqrt 3) = sqrt(0.52) / 0.69282
  EXPECT_NEAR(residual(Eigen::Vector3d(0.0, -0.4, 0.2), o).value, std::sqrt(0.52) / (0.4 * std::sqrt(3.0)), 1e-14);
  OracleSolution zero;
  zero.x_star_vec = Eigen::VectorXd::Zero(2);
  const auto r = residual(Eigen::Vector2d(3, 4), zero);
  EXPECT_TRUE(r.absolute);
  EXPECT_DOUBLE_EQ(r.value, 5.0);
}

TEST(Metrics, ConsensusAndCostGap) {
  const Topology t = path_graph(3);
  EXPECT_DOUBLE_EQ(consensus_gap(Eigen::Vector3d(0, 0.5, -1), t), 1.5);
  const auto costs = two_node_costs();
  const auto o = solve_centralized(costs, two_node());
  EXPECT_DOUBLE_EQ(cost_gap(Eigen::Vector2d(0, 2), costs, o), -1.0);
}

TEST(Lyapunov, NonNegativeAndSaddleValue) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Topology t = erdos_renyi(7, 0.5, seed);
    const auto costs = generate_ls_instance(7, seed).local_costs();
    const auto o = solve_centralized(costs, t);
    const auto inc = build_incidence(t);
    RunConfig cfg;
    cfg.rho = 0.5 + static_cast<double>(seed % 3);
    EXPECT_NEAR(lyapunov(o.x_star_vec, o.lambda_star, o, inc, cfg),
                0.5 * cfg.rho * static_cast<double>(t.m()) * o.x_star * o.x_star, 1e-12);
    cfg.eps1 = 0.5;
    cfg.eps2 = 1.5;
    const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(7, -2, 3);
    const Eigen::VectorXd l = Eigen::VectorXd::LinSpaced(static_cast<Eigen::Index>(t.m()), 1, -1);
    EXPECT_GE(lyapunov(x, l, o, inc, cfg), 0.0);
  }
}

TEST(Lyapunov, TwoNodeHandValue) {
  // V = (1/2)(lambda - 1 + x_2)^2 + 2 (x_2 - 1)^2 with E = [0, -1]
  const auto o = solve_centralized(two_node_costs(), two_node());
  const auto inc = build_incidence(two_node());
  EXPECT_DOUBLE_EQ(lyapunov(Eigen::Vector2d(0, 0), Eigen::VectorXd::Zero(1), o, inc, RunConfig{}), 2.5);
  EXPECT_DOUBLE_EQ(lyapunov(Eigen::Vector2d(0, 0.5), Eigen::VectorXd::Zero(1), o, inc, RunConfig{}), 0.625);
}

TEST(DescentSlack, TwoNodeFirstStep) {
  // 2.5 - 0.625 - (1/2)(2 E (x^1 - x^0) - A x^1)^2 = 1.875 - 0.125
  const auto o = solve_centralized(two_node_costs(), two_node());
  const auto inc = build_incidence(two_node());
  EXPECT_DOUBLE_EQ(descent_slack(rec(0, {0, 0}, {0}), rec(1, {0, 0.5}, {0}), o, inc, RunConfig{}), 1.75);
}

TEST(DescentSlack, ZeroAtSaddle) {
  const Topology t = erdos_renyi(6, 0.5, 9);
  const auto costs = generate_ls_instance(6, 9).local_costs();
  const auto o = solve_centralized(costs, t);
  const auto inc = build_incidence(t);
  const IterationRecord s{0, o.x_star_vec, o.lambda_star};
  RunConfig cfg;
  cfg.eps1 = 0.5;
  EXPECT_NEAR(descent_slack(s, s, o, inc, cfg), 0.0, 1e-12);
  EXPECT_NEAR(descent_slack(s, s, o, inc, cfg, EpsScaling::Halved), 0.0, 1e-12);
}

TEST(EpsScaling, CoincideAtZero) {
  const Topology t = erdos_renyi(6, 0.5, 10);
  const auto costs = generate_ls_instance(6, 10).local_costs();
  const auto o = solve_centralized(costs, t);
  const auto inc = build_incidence(t);
  RunConfig cfg;
  cfg.max_iter = 30;
  const auto trace = run(cfg, t, costs);
  for (std::size_t k = 0; k + 1 < trace.records.size(); ++k)
    EXPECT_EQ(descent_slack(trace.records[k], trace.records[k + 1], o, inc, cfg),
              descent_slack(trace.records[k], trace.records[k + 1], o, inc, cfg, EpsScaling::Halved));
}

// The per-step optimality inequality with E^T A coupling follows from the
// x-update's first-order conditions, so it must hold on every step.
TEST(StepInequality, EtAHoldsOnRandomRuns) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const std::size_t n = 3 + seed % 9;
    const Topology t = erdos_renyi(n, 0.5, seed);
    const auto costs = generate_ls_instance(n, seed).local_costs();
    const auto o = solve_centralized(costs, t);
    const auto inc = build_incidence(t);
    RunConfig cfg;
    cfg.rho = 0.5 * static_cast<double>(1 + seed % 4);
    cfg.eps1 = cfg.eps2 = 0.5 * static_cast<double>(seed % 2);
    cfg.max_iter = 60;
    const auto trace = run(cfg, t, costs);
    for (std::size_t k = 0; k + 1 < trace.records.size(); ++k)
      ASSERT_GE(step_inequality_slack(trace.records[k], trace.records[k + 1], o.x_star_vec, costs, inc, cfg,
                                      CouplingForm::EtA),
                -1e-9)
          << "seed " << seed << " k " << k;
  }
}

TEST(Ergodic, TwoNodeFirstMargin) {
  // V0_bar = 2; xbar^1 = (0, 0.5) so F = 1.125 against F* = 1
  const auto costs = two_node_costs();
  const auto o = solve_centralized(costs, two_node());
  RunConfig cfg;
  cfg.max_iter = 1;
  const auto trace = run(cfg, two_node(), costs);
  const auto rep = ergodic_bound_check(trace, costs, o, build_incidence(two_node()), cfg);
  EXPECT_DOUBLE_EQ(rep.V0_bar, 2.0);
  ASSERT_EQ(rep.margins.size(), 1u);
  EXPECT_DOUBLE_EQ(rep.margins[0], 1.875);
}

TEST(Ergodic, MarginMatchesIndependentAverage) {
  const Topology t = erdos_renyi(9, 0.4, 42);
  const auto costs = generate_ls_instance(9, 42).local_costs();
  const auto o = solve_centralized(costs, t);
  RunConfig cfg;
  cfg.max_iter = 3000;
  const auto trace = run(cfg, t, costs);
  const auto rep = ergodic_bound_check(trace, costs, o, build_incidence(t), cfg);
  ASSERT_EQ(rep.margins.size(), 3000u);
  for (std::size_t s : {1u, 7u, 100u, 2999u}) {
    Eigen::VectorXd xbar = Eigen::VectorXd::Zero(9);
    for (std::size_t k = 1; k <= s; ++k) xbar += trace.records[k].x;
    xbar /= static_cast<double>(s);
    const double gap = global_cost(xbar, costs) - o.F_star;
    EXPECT_NEAR(rep.margins[s - 1] * static_cast<double>(s), rep.V0_bar - static_cast<double>(s) * gap,
                1e-9 * static_cast<double>(s));
  }
}

TEST(ViResidual, SaddleAndFarPoint) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Topology t = erdos_renyi(8, 0.4, seed);
    const auto costs = generate_ls_instance(8, seed).local_costs();
    const auto o = solve_centralized(costs, t);
    const auto inc = build_incidence(t);
    EXPECT_LE(vi_residual(o.x_star_vec, o.lambda_star, costs, o, inc), 1e-8);
    EXPECT_GT(vi_residual(Eigen::VectorXd::Zero(8), Eigen::VectorXd::Zero(static_cast<Eigen::Index>(t.m())), costs,
                          o, inc),
              0.0);
  }
}

TEST(ConsensusGap, EventuallyMonotoneBelowThreshold) {
  const Topology t = erdos_renyi(9, 0.4, 42);
  const auto costs = generate_ls_instance(9, 42).local_costs();
  RunConfig cfg;
  cfg.max_iter = 2000;
  const auto trace = run(cfg, t, costs);
  std::vector<double> gap;
  for (const auto& r : trace.records) gap.push_back(consensus_gap(r.x, t));
  // x^0 = 0 is consensual, so look for the last crossing
  std::size_t last_above = 0;
  for (std::size_t k = 0; k < gap.size(); ++k)
    if (gap[k] >= 1e-6) last_above = k;
  ASSERT_GT(last_above, 0u);
  ASSERT_LT(last_above, 1000u);
  // per-step values oscillate; maxima over 20-iteration blocks decrease
  // until they reach the rounding floor
  double prev = 1e-6;
  for (std::size_t start = last_above + 1; start + 20 <= gap.size(); start += 20) {
    const double block = *std::max_element(gap.begin() + static_cast<long>(start),
                                           gap.begin() + static_cast<long>(start + 20));
    if (prev < 1e-14) break;
    EXPECT_LE(block, prev) << "block at " << start;
    prev = block;
  }
}

TEST(Certificates, ReportAndCsv) {
  const Topology t = erdos_renyi(9, 0.4, 42);
  const auto costs = generate_ls_instance(9, 42).local_costs();
  const auto o = solve_centralized(costs, t);
  RunConfig cfg;
  cfg.max_iter = 50;
  const auto trace = run(cfg, t, costs);
  const auto rep = certify(trace, costs, t, o);
  EXPECT_EQ(rep.rows.size(), 51u);
  EXPECT_TRUE(rep.all_finite());
  EXPECT_TRUE(std::isnan(rep.rows.back().descent_slack));
  EXPECT_TRUE(rep.step_inequality_EtA_pass());
  EXPECT_TRUE(rep.ergodic_pass());
  std::ostringstream out;
  write_certificate_csv(out, rep);
  const std::string s = out.str();
  EXPECT_EQ(s.rfind("k,V,descent_slack,residual,consensus_gap,cost_gap\n", 0), 0u);
  EXPECT_NE(s.find("# summary\n"), std::string::npos);
  EXPECT_NE(s.find("# ergodic_bound,PASS,"), std::string::npos);
  EXPECT_NE(s.find("# descent,"), std::string::npos);
}
