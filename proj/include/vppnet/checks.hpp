#ifndef VPPNET_CHECKS_HPP
#define VPPNET_CHECKS_HPP

#include <string>
#include <vector>

#include "vppnet/core.hpp"
#include "vppnet/neural.hpp"

namespace vppnet {

/// Deliberate defects for negative-control runs of the property suites.
/// kPositionalEncoding adds an agent-index-dependent bias to the network
/// output; kNoGaugeClamp divides by the bare row maximum instead of
/// max(1, psi).
enum class FaultInjection { kNone, kPositionalEncoding, kNoGaugeClamp };

struct SuiteResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Runs the self-check suites: equivariance, feasibility under random
/// weights, gauge-map laws, oracle cross-check, gradient check.
std::vector<SuiteResult> run_property_checks(
    std::uint64_t seed, FaultInjection fault = FaultInjection::kNone);

bool all_passed(const std::vector<SuiteResult>& results);

/// Random feasible instance with a strict interior; capability and demand
/// drawn over the data distribution's range.
ProblemInstance random_instance(Rng& rng, int n_agents, double p_omax = 100.0);

/// Random instance whose net-output bound is likely to bind at the optimum
/// (low demand, tight threshold), for exercising the solver's
/// constrained branch.
ProblemInstance random_binding_instance(Rng& rng, int n_agents);

}  // namespace vppnet

#endif  // VPPNET_CHECKS_HPP
