#ifndef DPADMM_COSTS_HPP
#define DPADMM_COSTS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "dpadmm/error.hpp"
#include "dpadmm/rng.hpp"

namespace dpadmm {

/// f(x) = a x^2 + b x + c with a >= 0.
struct QuadraticCoefficients {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
};

template <class T>
concept CostModel = requires(const T& f, double x) {
  { f.evaluate(x) } -> std::convertible_to<double>;
  { f.subgradient(x) } -> std::convertible_to<double>;
};

template <class T>
concept QuadraticCostModel = CostModel<T> && requires(const T& f) {
  { f.quadratic() } -> std::convertible_to<QuadraticCoefficients>;
};

/// Private convex scalar cost of one agent. Cheap to copy; the model
/// behind it is immutable and shared.
class LocalCost {
 public:
  template <CostModel Model>
  LocalCost(Model model)  // NOLINT(google-explicit-constructor)
      : impl_(std::make_shared<const Holder<Model>>(std::move(model))) {}

  double evaluate(double x) const { return impl_->evaluate(x); }
  double subgradient(double x) const { return impl_->subgradient(x); }
  std::optional<QuadraticCoefficients> quadratic() const { return impl_->quadratic(); }

 private:
  struct Concept {
    virtual ~Concept() = default;
    virtual double evaluate(double x) const = 0;
    virtual double subgradient(double x) const = 0;
    virtual std::optional<QuadraticCoefficients> quadratic() const = 0;
  };

  template <class Model>
  struct Holder final : Concept {
    explicit Holder(Model m) : model(std::move(m)) {}
    double evaluate(double x) const override { return model.evaluate(x); }
    double subgradient(double x) const override { return model.subgradient(x); }
    std::optional<QuadraticCoefficients> quadratic() const override {
      if constexpr (QuadraticCostModel<Model>) {
        return QuadraticCoefficients(model.quadratic());
      } else {
        return std::nullopt;
      }
    }
    Model model;
  };

  std::shared_ptr<const Concept> impl_;
};

struct QuadraticCost {
  QuadraticCoefficients coef;

  double evaluate(double x) const { return (coef.a * x + coef.b) * x + coef.c; }
  double subgradient(double x) const { return 2.0 * coef.a * x + coef.b; }
  QuadraticCoefficients quadratic() const { return coef; }
};

/// f(x) = 1/2 (M x - y)^2.
struct LeastSquaresCost {
  double M = 0.0;
  double y = 0.0;

  double evaluate(double x) const {
    const double r = M * x - y;
    return 0.5 * r * r;
  }
  double subgradient(double x) const { return M * (M * x - y); }
  QuadraticCoefficients quadratic() const { return {0.5 * M * M, -M * y, 0.5 * y * y}; }

  friend bool operator==(const LeastSquaresCost&, const LeastSquaresCost&) = default;
};

/// f(x) = w |x - c|; the subgradient at the kink is 0.
struct AbsoluteCost {
  double weight = 1.0;
  double center = 0.0;

  double evaluate(double x) const { return weight * std::abs(x - center); }
  double subgradient(double x) const {
    if (x > center) return weight;
    if (x < center) return -weight;
    return 0.0;
  }
};

/// Huber loss around `center` with transition width `delta`.
struct HuberCost {
  double delta = 1.0;
  double center = 0.0;

  double evaluate(double x) const {
    const double r = std::abs(x - center);
    return r <= delta ? 0.5 * r * r : delta * (r - 0.5 * delta);
  }
  double subgradient(double x) const { return std::clamp(x - center, -delta, delta); }
};

/// Escape hatch for ad-hoc costs (tests, experiments).
struct FunctionCost {
  std::function<double(double)> value;
  std::function<double(double)> slope;

  double evaluate(double x) const { return value(x); }
  double subgradient(double x) const { return slope(x); }
};

struct Anchor {
  double weight = 0.0;
  double center = 0.0;
};

/// minimize f(x) + linear * x + sum_t anchors[t].weight * (x - anchors[t].center)^2
struct ScalarSubproblem {
  LocalCost cost;
  double linear = 0.0;
  std::vector<Anchor> anchors;

  double total_anchor_weight() const {
    double w = 0.0;
    for (const Anchor& a : anchors) w += a.weight;
    return w;
  }

  double objective(double x) const {
    double v = cost.evaluate(x) + linear * x;
    for (const Anchor& a : anchors) v += a.weight * (x - a.center) * (x - a.center);
    return v;
  }

  double slope(double x) const {
    double g = cost.subgradient(x) + linear;
    for (const Anchor& a : anchors) g += 2.0 * a.weight * (x - a.center);
    return g;
  }
};

enum class SolveMethod { Auto, Bisection };

namespace detail {

inline double bisect_subproblem(const ScalarSubproblem& p, double tol) {
  const double w = p.total_anchor_weight();
  double start = 0.0;
  if (w > 0.0) {
    for (const Anchor& a : p.anchors) start += a.weight * a.center;
    start /= w;
  }
  auto small = [tol](double g, double x) { return std::abs(g) <= tol * std::max(1.0, std::abs(x)); };

  const double g0 = p.slope(start);
  if (small(g0, start)) return start;

  // Bracket [lo, hi] with slope(lo) <= 0 <= slope(hi).
  double lo = start, hi = start;
  double step = std::max(1.0, std::abs(start));
  constexpr int kMaxDoublings = 200;
  int doublings = 0;
  if (g0 > 0.0) {
    lo = start - step;
    while (p.slope(lo) > 0.0) {
      if (++doublings > kMaxDoublings || !std::isfinite(lo))
        throw Error(ErrorCode::BracketFailure, "slope stays positive while expanding downward");
      hi = lo;
      step *= 2.0;
      lo = start - step;
    }
  } else {
    hi = start + step;
    while (p.slope(hi) < 0.0) {
      if (++doublings > kMaxDoublings || !std::isfinite(hi))
        throw Error(ErrorCode::BracketFailure, "slope stays negative while expanding upward");
      lo = hi;
      step *= 2.0;
      hi = start + step;
    }
  }

  double mid = lo + 0.5 * (hi - lo);
  for (int it = 0; it < 2000; ++it) {
    mid = lo + 0.5 * (hi - lo);
    if (mid <= lo || mid >= hi) break;  // interval exhausted at double resolution
    const double g = p.slope(mid);
    if (small(g, mid)) break;
    (g > 0.0 ? hi : lo) = mid;
  }
  return mid;
}

}  // namespace detail

/// Minimizer of a strictly convex scalar subproblem.
///
/// Quadratic costs are solved by the linear stationarity equation; any
/// other cost by slope-sign bisection from the anchor-weighted mean with a
/// doubling bracket. The result satisfies
/// |slope(x)| <= tol * max(1, |x|), or for a kinked cost sits at the kink
/// to double resolution.
inline double solve_subproblem(const ScalarSubproblem& p, double tol,
                               SolveMethod method = SolveMethod::Auto) {
  if (!(tol > 0.0)) throw Error(ErrorCode::InvalidConfig, "subproblem tolerance must be positive");
  for (const Anchor& a : p.anchors) {
    if (!(a.weight > 0.0)) throw Error(ErrorCode::NonPositiveWeight, "anchor weight must be positive");
  }
  if (method == SolveMethod::Auto) {
    if (const auto q = p.cost.quadratic()) {
      double curvature = q->a;
      double rhs = -q->b - p.linear;
      for (const Anchor& a : p.anchors) {
        curvature += a.weight;
        rhs += 2.0 * a.weight * a.center;
      }
      if (!(curvature > 0.0))
        throw Error(ErrorCode::NonPositiveWeight, "subproblem is not strictly convex");
      return rhs / (2.0 * curvature);
    }
  }
  return detail::bisect_subproblem(p, tol);
}

/// A seeded least-squares sensing instance: y_i = M_i * signal + e_i.
struct LeastSquaresInstance {
  std::uint64_t seed = 0;
  double signal = 0.0;
  std::vector<LeastSquaresCost> costs;

  std::size_t size() const { return costs.size(); }

  std::vector<LocalCost> local_costs() const {
    return {costs.begin(), costs.end()};
  }

  friend bool operator==(const LeastSquaresInstance&, const LeastSquaresInstance&) = default;
};

struct InstanceOptions {
  bool noiseless = false;  // test hook: forces every e_i to 0
};

/// Draws signal ~ N(0,1) from stream 0, and (M_i, e_i) ~ N(0,1) from the
/// stream of agent i. Deterministic in (n, seed).
inline LeastSquaresInstance generate_ls_instance(std::size_t n, std::uint64_t seed,
                                                 InstanceOptions options = {}) {
  if (n < 2) throw Error(ErrorCode::InvalidConfig, "instance needs at least 2 agents");
  LeastSquaresInstance inst;
  inst.seed = seed;
  inst.signal = Rng(seed, 0).normal();
  inst.costs.reserve(n);
  for (std::size_t i = 1; i <= n; ++i) {
    Rng rng(seed, i);
    const double M = rng.normal();
    const double e = rng.normal();
    inst.costs.push_back({M, M * inst.signal + (options.noiseless ? 0.0 : e)});
  }
  return inst;
}

inline nlohmann::json instance_to_json(const LeastSquaresInstance& inst) {
  nlohmann::json costs = nlohmann::json::array();
  for (const auto& c : inst.costs) costs.push_back({{"M", c.M}, {"y", c.y}});
  return {{"n", inst.costs.size()}, {"seed", inst.seed}, {"signal", inst.signal}, {"costs", costs}};
}

inline LeastSquaresInstance instance_from_json(const nlohmann::json& j) {
  try {
    LeastSquaresInstance inst;
    inst.seed = j.at("seed").get<std::uint64_t>();
    inst.signal = j.value("signal", 0.0);
    for (const auto& c : j.at("costs")) inst.costs.push_back({c.at("M").get<double>(), c.at("y").get<double>()});
    if (inst.costs.size() != j.at("n").get<std::size_t>())
      throw Error(ErrorCode::ConfigError, "instance 'n' does not match number of cost records");
    return inst;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("malformed instance: ") + e.what());
  }
}

inline void save_instance(const LeastSquaresInstance& inst, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write instance file " + path);
  out << instance_to_json(inst).dump(2) << '\n';
}

inline LeastSquaresInstance load_instance(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, "instance file not found: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigError, "instance file " + path + ": " + e.what());
  }
  return instance_from_json(j);
}

}  // namespace dpadmm

#endif  // DPADMM_COSTS_HPP
