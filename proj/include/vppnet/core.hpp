#ifndef VPPNET_CORE_HPP
#define VPPNET_CORE_HPP

#include <Eigen/Dense>
#include <vector>

#include "vppnet/common.hpp"

namespace vppnet {

/// Per-agent dispatch decision in kW, one entry per agent, same order as the
/// instance's agent list.
using DecisionVector = Eigen::VectorXd;

/// One distributed generator agent: generation capability and load demand.
struct AgentInput {
  double p_cap = 0.0;  ///< generation capability, kW (> 0)
  double p_dem = 0.0;  ///< load demand, kW (>= 0)
};

/// One dispatch problem: a set of agents plus the net-output threshold.
/// Agents are stored in an ordered list purely as a storage order; every
/// operation on instances is order-free.
///
/// Immutable after construction; safe for concurrent use.
class ProblemInstance {
 public:
  ProblemInstance(std::vector<AgentInput> agents, double p_omax);

  int n_agents() const { return static_cast<int>(agents_.size()); }
  const std::vector<AgentInput>& agents() const { return agents_; }
  const AgentInput& agent(int i) const {
    return agents_[static_cast<std::size_t>(i)];
  }
  double p_omax() const { return p_omax_; }

  /// Sum of capabilities / demands, computed order-canonically so permuted
  /// instances report bitwise-identical totals.
  double total_cap() const { return total_cap_; }
  double total_dem() const { return total_dem_; }

  /// True iff the constraint set {u : box and net-output bounds} is nonempty,
  /// i.e. sum(p_dem) - p_omax <= sum(p_cap).
  bool is_feasible() const { return total_dem_ - p_omax_ <= total_cap_; }

  Eigen::VectorXd cap_vector() const;
  Eigen::VectorXd dem_vector() const;

 private:
  std::vector<AgentInput> agents_;
  double p_omax_;
  double total_cap_;
  double total_dem_;
};

/// A bijection on {0..N-1}. Output index i takes input index perm[i].
class Permutation {
 public:
  explicit Permutation(std::vector<int> perm);

  static Permutation identity(int n);
  static Permutation random(int n, Rng& rng);

  int size() const { return static_cast<int>(perm_.size()); }
  int operator()(int i) const { return perm_[static_cast<std::size_t>(i)]; }
  Permutation inverse() const;

 private:
  std::vector<int> perm_;
};

/// Constraint blocks for one agent in the general linear form:
///   a_eq u^i + b_eq = 0,  a_ineq u^i + b_ineq <= 0   (local)
///   sum_i (a_cpl u^i + b_cpl) <= 0                    (coupled)
/// The coupled row count is shared across all agents.
struct AgentBlock {
  Eigen::MatrixXd a_eq;
  Eigen::VectorXd b_eq;
  Eigen::MatrixXd a_ineq;
  Eigen::VectorXd b_ineq;
  Eigen::MatrixXd a_cpl;
  Eigen::VectorXd b_cpl;
};

/// Explicit matrix form of a linearly-constrained problem over per-agent
/// variables. Validates dimensional consistency on construction.
class GeneralLinearSpec {
 public:
  explicit GeneralLinearSpec(std::vector<AgentBlock> blocks);

  int n_agents() const { return static_cast<int>(blocks_.size()); }
  const std::vector<AgentBlock>& blocks() const { return blocks_; }
  const AgentBlock& block(int i) const {
    return blocks_[static_cast<std::size_t>(i)];
  }

  /// Variable dimension of agent i.
  int dim_of(int i) const;
  /// Total variable dimension (sum over agents).
  int total_dim() const { return total_dim_; }
  int n_coupled_rows() const { return n_coupled_rows_; }
  int n_equality_rows() const;

  /// Largest constraint violation of the flat stacked vector u:
  /// max(0, inequality and coupled row values, |equality residuals|).
  /// Coupled row sums are order-canonical.
  double max_violation(const Eigen::VectorXd& u) const;

  /// Stacked global equality system A u + b = 0 over the flat variables
  /// (block diagonal across agents).
  Eigen::MatrixXd stacked_eq_matrix() const;
  Eigen::VectorXd stacked_eq_offset() const;
  /// Stacked local inequality system A u + b <= 0.
  Eigen::MatrixXd stacked_ineq_matrix() const;
  Eigen::VectorXd stacked_ineq_offset() const;
  /// Coupled rows as a single dense system C u + d <= 0 with
  /// d = sum_i b_cpl^i.
  Eigen::MatrixXd coupled_matrix() const;
  Eigen::VectorXd coupled_offset() const;

 private:
  std::vector<AgentBlock> blocks_;
  int total_dim_ = 0;
  int n_coupled_rows_ = 0;
};

/// Wasted-resource cost: sum_i (u_i - p_cap_i)^2, in kW^2. Zero iff every
/// agent generates at capability. Order-canonical, so exactly
/// permutation-compatible.
double objective(const ProblemInstance& instance, const DecisionVector& u);

/// Largest constraint violation of u in kW: box bounds per agent plus both
/// sides of the net-output band. Zero iff u is feasible.
double feasibility_gap(const ProblemInstance& instance,
                       const DecisionVector& u);

/// Relative squared distance ||u - u*||^2 / ||u*||^2. Throws
/// UndefinedGapError when ||u*|| = 0.
double optimality_gap(const DecisionVector& u, const DecisionVector& u_star);

/// Reorders agents: output agent i is input agent perm(i).
ProblemInstance apply_permutation(const Permutation& perm,
                                  const ProblemInstance& instance);
DecisionVector apply_permutation(const Permutation& perm,
                                 const DecisionVector& u);

/// Expands an instance's box and net-output constraints into explicit
/// general linear form. Per agent: two inequality rows (-u_i <= 0 and
/// u_i - p_cap_i <= 0), no equality rows. The net-output band becomes two
/// coupled rows with the threshold split evenly across agents, which keeps
/// the construction permutation-equivariant.
GeneralLinearSpec to_general_spec(const ProblemInstance& instance);

}  // namespace vppnet

#endif  // VPPNET_CORE_HPP
