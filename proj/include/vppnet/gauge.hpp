#ifndef VPPNET_GAUGE_HPP
#define VPPNET_GAUGE_HPP

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "vppnet/core.hpp"

namespace vppnet {

/// One normalized inequality row of the gauge construction: u0 + z satisfies
/// the row iff sum(coeff * z) <= slack, with slack > 0.
struct GaugeRow {
  /// Sparse coefficients as (agent index, value) pairs, ascending by index.
  std::vector<std::pair<int, double>> coeffs;
  double slack = 0.0;
};

/// Interior point plus normalized constraint rows for one instance. Rows are
/// kept in a fixed canonical order: for each agent, the upper box row then
/// the lower box row; then the coupled upper and coupled lower rows. The
/// canonical order decides which subgradient the backward pass picks when the
/// row maximum ties.
///
/// Immutable; safe for concurrent evaluation.
class GaugeData {
 public:
  GaugeData(DecisionVector u0, std::vector<GaugeRow> rows);

  const DecisionVector& interior_point() const { return u0_; }
  const std::vector<GaugeRow>& rows() const { return rows_; }
  int dim() const { return static_cast<int>(u0_.size()); }

 private:
  DecisionVector u0_;
  std::vector<GaugeRow> rows_;
};

/// Scaled-capacity interior point: u0 = t * p_cap with t the midpoint of
///   ((sum dem - p_omax)/sum cap, (sum dem + p_omax)/sum cap)
/// intersected with (eps, 1-eps), eps = 1e-3. Strictly feasible and
/// permutation-equivariant by construction. Throws InfeasibleError when the
/// interval is empty (infeasible or degenerate instance).
DecisionVector compute_interior_point(const ProblemInstance& instance);

/// True iff compute_interior_point would succeed.
bool has_interior(const ProblemInstance& instance);

/// Builds the normalized rows around a strictly feasible u0. Per agent i the
/// box bounds give rows (+e_i, p_cap_i - u0_i) and (-e_i, u0_i); the
/// net-output band gives all-ones rows with slacks p_omax -/+ sum(u0 - dem).
/// Throws NumericError if any slack is nonpositive (u0 not interior).
GaugeData build_gauge_data(const ProblemInstance& instance,
                           const DecisionVector& u0);

/// Generalized gauge function: max(0, max_r (a_r . v) / h_r). Positively
/// homogeneous; psi(v) <= 1 iff u0 + v is feasible. Coupled row sums are
/// order-canonical, so the value is bitwise permutation-invariant.
double gauge_psi(const GaugeData& gd, const DecisionVector& v);

/// Closed-form feasibility map: u = u0 + v / max(1, psi(v)). Returns u0 + v
/// unchanged (bitwise) when psi(v) <= 1, otherwise rescales v onto the
/// boundary of the feasible set. Always feasible for any v.
DecisionVector gauge_map(const GaugeData& gd, const DecisionVector& v);

/// Reverse-mode derivative of gauge_map: given v and dL/du for
/// u = gauge_map(gd, v), returns dL/dv. In the rescaling regime the max is
/// differentiated through its first attaining row in canonical order.
DecisionVector gauge_map_backward(const GaugeData& gd, const DecisionVector& v,
                                  const DecisionVector& upstream);

/// Null-space parameterization of the equality system of a spec: every
/// u = particular + basis * z satisfies all equality rows, and the
/// inequality/coupled rows are rewritten over z in reduced_spec. When the
/// spec has no equality rows, particular = 0, basis = identity and
/// reduced_spec is the input spec unchanged; otherwise reduced_spec collapses
/// to a single block over the reduced variables.
struct EliminationMap {
  Eigen::VectorXd particular;
  Eigen::MatrixXd basis;
  GeneralLinearSpec reduced_spec;

  Eigen::VectorXd reconstruct(const Eigen::VectorXd& z) const {
    if (z.size() != basis.cols()) {
      throw DimensionError("EliminationMap::reconstruct: size mismatch");
    }
    return particular + basis * z;
  }
};

/// Eliminates the equality rows of a spec by deterministic Gauss-Jordan
/// reduction with partial pivoting (pivot tolerance 1e-9). Rank deficiency
/// just enlarges the null space; an inconsistent system throws
/// InfeasibleError.
EliminationMap eliminate_equalities(const GeneralLinearSpec& spec);

}  // namespace vppnet

#endif  // VPPNET_GAUGE_HPP
