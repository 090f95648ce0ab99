#ifndef VPPNET_ORACLE_HPP
#define VPPNET_ORACLE_HPP

#include "vppnet/core.hpp"
#include "vppnet/neural.hpp"

namespace vppnet {

/// Exact global optimum of the dispatch problem. Let s = sum(cap) - sum(dem).
/// When s <= p_omax the unconstrained optimum u* = p_cap is feasible and
/// returned directly. When s > p_omax the net-output upper bound binds and
/// u*_i = max(p_cap_i - lambda, 0) with lambda found by bisection (1e-10 kW
/// tolerance on the sum). s < -p_omax means the instance is infeasible.
/// Bitwise permutation-equivariant. Throws InfeasibleError on infeasible
/// instances.
DecisionVector solve_exact(const ProblemInstance& instance);

/// Slow independent solver, used only by tests and self-checks.
/// step > 0 selects exhaustive grid search over the box with the given grid
/// spacing (requires N <= 6); step <= 0 selects projected gradient descent
/// (step 1e-2, at most 1e5 iterations) with an exact Dykstra projection onto
/// box-and-band. Throws NumericError if the iteration budget runs out
/// without convergence.
DecisionVector solve_bruteforce(const ProblemInstance& instance,
                                double step = 0.0);

/// Side-by-side wall-clock medians (microseconds) over k=11 runs each:
/// the exact solver vs the full model inference path (interior point, gauge
/// construction, forward pass, gauge map).
struct TimingReport {
  double model_us = 0.0;
  double oracle_us = 0.0;
};
TimingReport time_solver(const ProblemInstance& instance,
                         const ModelParams& params);

/// One full inference: interior point, gauge rows, forward, gauge map.
DecisionVector predict(const ModelParams& params,
                       const ProblemInstance& instance);

}  // namespace vppnet

#endif  // VPPNET_ORACLE_HPP
