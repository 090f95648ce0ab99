#include "vppnet/oracle.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "vppnet/gauge.hpp"

namespace vppnet {

namespace {

constexpr double kSumTol = 1e-10;       // bisection tolerance on the sum, kW
constexpr double kPgdStep = 1e-2;       // projected-gradient step size
constexpr int kPgdMaxIters = 100000;

/// sum_i max(cap_i - lambda, 0), order-canonical.
double clipped_sum(const ProblemInstance& inst, double lambda) {
  std::vector<double> terms(static_cast<std::size_t>(inst.n_agents()));
  for (int i = 0; i < inst.n_agents(); ++i) {
    terms[static_cast<std::size_t>(i)] =
        std::max(inst.agent(i).p_cap - lambda, 0.0);
  }
  return set_sum(terms);
}

/// Exact Euclidean projection onto {0 <= u <= cap} intersected with
/// {|sum(u - dem)| <= p_omax}, via Dykstra's alternating projections with
/// box clips and uniform sum shifts.
DecisionVector project_box_band(const ProblemInstance& inst,
                                const DecisionVector& y) {
  const int n = inst.n_agents();
  const Eigen::VectorXd cap = inst.cap_vector();
  const Eigen::VectorXd dem = inst.dem_vector();
  DecisionVector x = y;
  DecisionVector p = DecisionVector::Zero(n);
  DecisionVector q = DecisionVector::Zero(n);
  for (int iter = 0; iter < 2000; ++iter) {
    const DecisionVector xb =
        (x + p).cwiseMax(DecisionVector::Zero(n)).cwiseMin(cap);
    p = (x + p) - xb;
    const DecisionVector z = xb + q;
    const double net = (z - dem).sum();
    DecisionVector xs = z;
    if (net > inst.p_omax()) {
      xs.array() -= (net - inst.p_omax()) / n;
    } else if (net < -inst.p_omax()) {
      xs.array() += (-inst.p_omax() - net) / n;
    }
    q = z - xs;
    const double drift = (xs - x).cwiseAbs().maxCoeff();
    x = xs;
    if (drift < 1e-15 && feasibility_gap(inst, x) < 1e-12) break;
  }
  return x;
}

DecisionVector solve_pgd(const ProblemInstance& inst) {
  const Eigen::VectorXd cap = inst.cap_vector();
  DecisionVector u = project_box_band(inst, DecisionVector::Zero(inst.n_agents()));
  for (int iter = 0; iter < kPgdMaxIters; ++iter) {
    const DecisionVector next =
        project_box_band(inst, u - kPgdStep * 2.0 * (u - cap));
    const double change = (next - u).cwiseAbs().maxCoeff();
    u = next;
    if (change < 1e-13) return u;
  }
  throw NumericError("solve_bruteforce: iteration budget exceeded");
}

DecisionVector solve_grid(const ProblemInstance& inst, double step) {
  const int n = inst.n_agents();
  if (n > 6) {
    throw std::invalid_argument("solve_bruteforce: grid mode requires N <= 6");
  }
  // Per-agent candidate levels: multiples of step, plus the capability.
  std::vector<std::vector<double>> levels(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double cap = inst.agent(i).p_cap;
    auto& lv = levels[static_cast<std::size_t>(i)];
    for (double v = 0.0; v < cap; v += step) lv.push_back(v);
    lv.push_back(cap);
  }
  DecisionVector u(n), best(n);
  double best_obj = std::numeric_limits<double>::infinity();
  bool found = false;
  std::vector<std::size_t> idx(static_cast<std::size_t>(n), 0);
  while (true) {
    for (int i = 0; i < n; ++i) {
      u(i) = levels[static_cast<std::size_t>(i)][idx[static_cast<std::size_t>(i)]];
    }
    if (feasibility_gap(inst, u) <= 1e-9) {
      const double obj = objective(inst, u);
      if (obj < best_obj) {
        best_obj = obj;
        best = u;
        found = true;
      }
    }
    int d = 0;
    for (; d < n; ++d) {
      auto& k = idx[static_cast<std::size_t>(d)];
      if (++k < levels[static_cast<std::size_t>(d)].size()) break;
      k = 0;
    }
    if (d == n) break;
  }
  if (!found) {
    throw InfeasibleError("solve_bruteforce: no feasible grid point");
  }
  return best;
}

double median_us(std::vector<double>& samples) {
  std::sort(samples.begin(), samples.end());
  return samples[samples.size() / 2];
}

}  // namespace

DecisionVector solve_exact(const ProblemInstance& instance) {
  if (!instance.is_feasible()) {
    throw InfeasibleError("solve_exact: infeasible instance");
  }
  const double surplus = instance.total_cap() - instance.total_dem();
  if (surplus <= instance.p_omax()) {
    return instance.cap_vector();  // unconstrained optimum is feasible
  }
  // Net-output upper bound binds: find lambda with
  // sum_i max(cap_i - lambda, 0) = sum(dem) + p_omax.
  const double target = instance.total_dem() + instance.p_omax();
  double lo = 0.0;
  double hi = instance.cap_vector().maxCoeff();
  double mid = hi;
  for (int iter = 0; iter < 200; ++iter) {
    mid = 0.5 * (lo + hi);
    const double s = clipped_sum(instance, mid);
    if (std::abs(s - target) <= kSumTol) break;
    if (s > target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  if (std::abs(clipped_sum(instance, mid) - target) > kSumTol) {
    throw NumericError("solve_exact: bisection failed to meet sum tolerance");
  }
  DecisionVector u(instance.n_agents());
  for (int i = 0; i < instance.n_agents(); ++i) {
    u(i) = std::max(instance.agent(i).p_cap - mid, 0.0);
  }
  return u;
}

DecisionVector solve_bruteforce(const ProblemInstance& instance, double step) {
  if (!instance.is_feasible()) {
    throw InfeasibleError("solve_bruteforce: infeasible instance");
  }
  if (step > 0.0) return solve_grid(instance, step);
  return solve_pgd(instance);
}

DecisionVector predict(const ModelParams& params,
                       const ProblemInstance& instance) {
  const DecisionVector u0 = compute_interior_point(instance);
  const GaugeData gd = build_gauge_data(instance, u0);
  const DecisionVector v = forward(params, instance);
  return gauge_map(gd, v);
}

TimingReport time_solver(const ProblemInstance& instance,
                         const ModelParams& params) {
  constexpr int kRuns = 11;
  using Clock = std::chrono::steady_clock;
  TimingReport report;
  std::vector<double> model_samples, oracle_samples;
  model_samples.reserve(kRuns);
  oracle_samples.reserve(kRuns);
  for (int r = 0; r < kRuns; ++r) {
    const auto t0 = Clock::now();
    volatile double sink = predict(params, instance).sum();
    const auto t1 = Clock::now();
    (void)sink;
    model_samples.push_back(
        std::chrono::duration<double, std::micro>(t1 - t0).count());
  }
  for (int r = 0; r < kRuns; ++r) {
    const auto t0 = Clock::now();
    volatile double sink = solve_exact(instance).sum();
    const auto t1 = Clock::now();
    (void)sink;
    oracle_samples.push_back(
        std::chrono::duration<double, std::micro>(t1 - t0).count());
  }
  report.model_us = median_us(model_samples);
  report.oracle_us = median_us(oracle_samples);
  return report;
}

}  // namespace vppnet
