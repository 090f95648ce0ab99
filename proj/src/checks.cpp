#include "vppnet/checks.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "vppnet/gauge.hpp"
#include "vppnet/oracle.hpp"

namespace vppnet {

namespace {

std::string sci(double v) {
  std::ostringstream ss;
  ss.precision(2);
  ss << std::scientific << v;
  return ss.str();
}

DecisionVector random_direction(Rng& rng, int n, double magnitude) {
  DecisionVector v(n);
  for (int i = 0; i < n; ++i) v(i) = rng.uniform(-magnitude, magnitude);
  return v;
}

bool bitwise_equal(const DecisionVector& a, const DecisionVector& b) {
  if (a.size() != b.size()) return false;
  for (int i = 0; i < a.size(); ++i) {
    if (a(i) != b(i)) return false;
  }
  return true;
}

/// Faulted output path: index-dependent bias after the network.
DecisionVector forward_with_fault(const ModelParams& params,
                                  const ProblemInstance& inst,
                                  FaultInjection fault) {
  DecisionVector v = forward(params, inst);
  if (fault == FaultInjection::kPositionalEncoding) {
    for (int i = 0; i < v.size(); ++i) v(i) += 0.1 * i;
  }
  return v;
}

/// Faulted map: divides by the bare row maximum (no clamp at 1).
DecisionVector gauge_map_with_fault(const GaugeData& gd,
                                    const DecisionVector& v,
                                    FaultInjection fault) {
  if (fault != FaultInjection::kNoGaugeClamp) return gauge_map(gd, v);
  double bare = -std::numeric_limits<double>::infinity();
  for (const auto& row : gd.rows()) {
    std::vector<double> terms;
    terms.reserve(row.coeffs.size());
    for (const auto& [idx, c] : row.coeffs) terms.push_back(c * v(idx));
    bare = std::max(bare, set_sum(terms) / row.slack);
  }
  return gd.interior_point() + v / bare;
}

SuiteResult check_equivariance(std::uint64_t seed, FaultInjection fault) {
  SuiteResult res{"equivariance", true, ""};
  Rng rng(seed ^ 0x1111);
  double worst_model = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = rng.uniform_int(1, 20);
    const ProblemInstance inst = random_instance(rng, n);
    const Permutation sigma = Permutation::random(n, rng);
    const ProblemInstance perm_inst = apply_permutation(sigma, inst);
    const ModelParams params =
        init_params({2, 16, 1, 1}, rng.next_u64());

    // Composed model within 1e-6.
    const DecisionVector u0 = compute_interior_point(inst);
    const GaugeData gd = build_gauge_data(inst, u0);
    const DecisionVector u =
        gauge_map_with_fault(gd, forward_with_fault(params, inst, fault), fault);
    const DecisionVector u0p = compute_interior_point(perm_inst);
    const GaugeData gdp = build_gauge_data(perm_inst, u0p);
    const DecisionVector up = gauge_map_with_fault(
        gdp, forward_with_fault(params, perm_inst, fault), fault);
    const double diff =
        (apply_permutation(sigma, u) - up).cwiseAbs().maxCoeff();
    worst_model = std::max(worst_model, diff);

    // Oracle and gauge map alone, bitwise.
    const DecisionVector star = solve_exact(inst);
    const DecisionVector star_p = solve_exact(perm_inst);
    if (!bitwise_equal(apply_permutation(sigma, star), star_p)) {
      res.passed = false;
      res.detail = "oracle not bitwise equivariant on trial " +
                   std::to_string(trial);
      return res;
    }
    const DecisionVector v = random_direction(rng, n, 40.0);
    const DecisionVector gv = gauge_map(gd, v);
    const DecisionVector gvp = gauge_map(gdp, apply_permutation(sigma, v));
    if (!bitwise_equal(apply_permutation(sigma, gv), gvp)) {
      res.passed = false;
      res.detail = "gauge map not bitwise equivariant on trial " +
                   std::to_string(trial);
      return res;
    }
  }
  res.passed = worst_model <= 1e-6;
  res.detail = "max composed-model deviation " + sci(worst_model);
  return res;
}

SuiteResult check_feasibility_random_weights(std::uint64_t seed) {
  SuiteResult res{"feasibility-random-weights", true, ""};
  Rng rng(seed ^ 0x2222);
  double worst = 0.0;
  for (int p = 0; p < 3; ++p) {
    const ModelParams params = init_params({2, 32, 1, 1}, rng.next_u64());
    for (int trial = 0; trial < 200; ++trial) {
      const ProblemInstance inst =
          random_instance(rng, rng.uniform_int(1, 20));
      worst = std::max(worst,
                       feasibility_gap(inst, predict(params, inst)));
    }
  }
  res.passed = worst <= 1e-6;
  res.detail = "max feasibility gap " + sci(worst) + " kW";
  return res;
}

SuiteResult check_gauge_laws(std::uint64_t seed, FaultInjection fault) {
  SuiteResult res{"gauge-laws", true, ""};
  Rng rng(seed ^ 0x3333);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = rng.uniform_int(1, 20);
    const ProblemInstance inst = random_instance(rng, n);
    const DecisionVector u0 = compute_interior_point(inst);
    const GaugeData gd = build_gauge_data(inst, u0);

    // Identity at v = 0 (catches a missing clamp immediately).
    const DecisionVector at_zero =
        gauge_map_with_fault(gd, DecisionVector::Zero(n), fault);
    if (!at_zero.allFinite() || !bitwise_equal(at_zero, u0)) {
      res.passed = false;
      res.detail = "map(0) != u0 on trial " + std::to_string(trial);
      return res;
    }

    const double mag = std::pow(10.0, rng.uniform(-1.0, 5.0));
    const DecisionVector v = random_direction(rng, n, mag);
    const double psi = gauge_psi(gd, v);
    const DecisionVector u = gauge_map_with_fault(gd, v, fault);
    if (psi <= 1.0) {
      if (!bitwise_equal(u, u0 + v)) {
        res.passed = false;
        res.detail = "interior pass-through not exact on trial " +
                     std::to_string(trial);
        return res;
      }
    } else {
      const double boundary = gauge_psi(gd, u - u0);
      if (std::abs(boundary - 1.0) > 1e-8) {
        res.passed = false;
        res.detail = "boundary law violated: |psi - 1| = " +
                     sci(std::abs(boundary - 1.0));
        return res;
      }
    }
    for (double alpha : {0.5, 2.0, 10.0}) {
      const double lhs = gauge_psi(gd, alpha * v);
      const double rhs = alpha * psi;
      const double denom = std::max(rhs, 1e-30);
      if (std::abs(lhs - rhs) / denom > 1e-10) {
        res.passed = false;
        res.detail = "homogeneity violated at alpha=" + std::to_string(alpha);
        return res;
      }
    }
  }
  res.detail = "identity/boundary/homogeneity held on 200 draws";
  return res;
}

SuiteResult check_oracle_crosscheck(std::uint64_t seed) {
  SuiteResult res{"oracle-crosscheck", true, ""};
  Rng rng(seed ^ 0x4444);
  double worst = 0.0;
  for (int trial = 0; trial < 40; ++trial) {
    const int n = rng.uniform_int(2, 5);
    const ProblemInstance inst = trial % 2 == 0
                                     ? random_instance(rng, n)
                                     : random_binding_instance(rng, n);
    const DecisionVector exact = solve_exact(inst);
    const DecisionVector brute = solve_bruteforce(inst);
    worst = std::max(worst, (exact - brute).cwiseAbs().maxCoeff());
    const double fe = objective(inst, exact);
    const double fb = objective(inst, brute);
    if (fe > fb + 1e-6) {
      res.passed = false;
      res.detail = "exact objective above brute-force on trial " +
                   std::to_string(trial);
      return res;
    }
  }
  res.passed = worst <= 1e-4;
  res.detail = "max solver disagreement " + sci(worst) + " kW";
  return res;
}

SuiteResult check_gradients(std::uint64_t seed) {
  SuiteResult res{"gradient-check", true, ""};
  Rng rng(seed ^ 0x5555);
  const HyperParams hyper{2, 8, 1, 1};

  // Find a test point with psi away from 1 and a clear row-max winner.
  ModelParams params = init_params(hyper, rng.next_u64());
  ProblemInstance inst = random_instance(rng, 3);
  for (int attempt = 0; attempt < 200; ++attempt) {
    const DecisionVector u0 = compute_interior_point(inst);
    const GaugeData gd = build_gauge_data(inst, u0);
    const DecisionVector v = forward(params, inst);
    const double psi = gauge_psi(gd, v);
    bool tie_free = true;
    if (psi > 1.0) {
      double best = 0.0, second = 0.0;
      for (const auto& row : gd.rows()) {
        std::vector<double> terms;
        for (const auto& [idx, c] : row.coeffs) terms.push_back(c * v(idx));
        const double val = set_sum(terms) / row.slack;
        if (val > best) {
          second = best;
          best = val;
        } else if (val > second) {
          second = val;
        }
      }
      tie_free = best - second >= 0.02 * best;
    }
    if (std::abs(psi - 1.0) >= 0.05 && tie_free) break;
    params = init_params(hyper, rng.next_u64());
    inst = random_instance(rng, 3);
  }

  const auto loss_at = [&](const Eigen::VectorXd& flat) {
    const ModelParams p = ModelParams::from_flat(hyper, flat);
    const DecisionVector u0 = compute_interior_point(inst);
    const GaugeData gd = build_gauge_data(inst, u0);
    return objective(inst, gauge_map(gd, forward(p, inst)));
  };

  // Analytic gradient through gauge map and network.
  const DecisionVector u0 = compute_interior_point(inst);
  const GaugeData gd = build_gauge_data(inst, u0);
  ForwardCache cache;
  const DecisionVector v = forward(params, inst, &cache);
  const DecisionVector u = gauge_map(gd, v);
  DecisionVector dloss_du(u.size());
  for (int i = 0; i < u.size(); ++i) {
    dloss_du(i) = 2.0 * (u(i) - inst.agent(i).p_cap);
  }
  const DecisionVector dloss_dv = gauge_map_backward(gd, v, dloss_du);
  const Eigen::VectorXd analytic =
      backward(params, cache, dloss_dv).to_flat();

  Eigen::VectorXd flat = params.to_flat();
  const double h = 1e-4;
  double worst_rel = 0.0;
  for (int k = 0; k < 20; ++k) {
    const int idx = rng.uniform_int(0, static_cast<int>(flat.size()) - 1);
    Eigen::VectorXd probe = flat;
    probe(idx) = flat(idx) + h;
    const double up = loss_at(probe);
    probe(idx) = flat(idx) - h;
    const double down = loss_at(probe);
    const double fd = (up - down) / (2.0 * h);
    const double a = analytic(idx);
    const double denom = std::max(std::abs(a), std::abs(fd));
    if (denom < 1e-6) continue;  // both effectively zero
    worst_rel = std::max(worst_rel, std::abs(a - fd) / denom);
  }
  res.passed = worst_rel <= 1e-4;
  res.detail = "max relative gradient error " + sci(worst_rel);
  return res;
}

}  // namespace

ProblemInstance random_instance(Rng& rng, int n_agents, double p_omax) {
  for (int attempt = 0; attempt < 1000; ++attempt) {
    std::vector<AgentInput> agents(static_cast<std::size_t>(n_agents));
    for (auto& a : agents) {
      a.p_cap = rng.uniform(9.0, 27.5);
      a.p_dem = rng.uniform(9.0, 27.5);
    }
    ProblemInstance inst(std::move(agents), p_omax);
    if (inst.is_feasible() && has_interior(inst)) return inst;
  }
  throw NumericError("random_instance: rejection budget exhausted");
}

ProblemInstance random_binding_instance(Rng& rng, int n_agents) {
  for (int attempt = 0; attempt < 1000; ++attempt) {
    std::vector<AgentInput> agents(static_cast<std::size_t>(n_agents));
    for (auto& a : agents) {
      a.p_cap = rng.uniform(9.0, 27.5);
      a.p_dem = rng.uniform(0.0, 8.0);
    }
    ProblemInstance inst(std::move(agents), rng.uniform(2.0, 30.0));
    if (inst.is_feasible() && has_interior(inst)) return inst;
  }
  throw NumericError("random_binding_instance: rejection budget exhausted");
}

std::vector<SuiteResult> run_property_checks(std::uint64_t seed,
                                             FaultInjection fault) {
  std::vector<SuiteResult> results;
  results.push_back(check_equivariance(seed, fault));
  results.push_back(check_feasibility_random_weights(seed));
  results.push_back(check_gauge_laws(seed, fault));
  results.push_back(check_oracle_crosscheck(seed));
  results.push_back(check_gradients(seed));
  return results;
}

bool all_passed(const std::vector<SuiteResult>& results) {
  for (const auto& r : results) {
    if (!r.passed) return false;
  }
  return true;
}

}  // namespace vppnet
