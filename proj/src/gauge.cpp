#include "vppnet/gauge.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace vppnet {

namespace {

constexpr double kInteriorMargin = 1e-3;
constexpr double kPivotTol = 1e-9;

/// Row value (a_r . v) / h_r with an order-canonical dot product.
double row_value(const GaugeRow& row, const DecisionVector& v) {
  if (row.coeffs.size() == 1) {
    const auto& [idx, c] = row.coeffs.front();
    opcount::add(2);
    return c * v(idx) / row.slack;
  }
  std::vector<double> terms;
  terms.reserve(row.coeffs.size());
  for (const auto& [idx, c] : row.coeffs) terms.push_back(c * v(idx));
  opcount::add(2 * terms.size());
  return set_sum(terms) / row.slack;
}

}  // namespace

GaugeData::GaugeData(DecisionVector u0, std::vector<GaugeRow> rows)
    : u0_(std::move(u0)), rows_(std::move(rows)) {
  for (std::size_t r = 0; r < rows_.size(); ++r) {
    if (!(rows_[r].slack > 0.0)) {
      throw NumericError("GaugeData: row " + std::to_string(r) +
                         " has nonpositive slack (u0 not interior)");
    }
    for (const auto& [idx, c] : rows_[r].coeffs) {
      (void)c;
      if (idx < 0 || idx >= u0_.size()) {
        throw DimensionError("GaugeData: row coefficient index out of range");
      }
    }
  }
}

namespace {

/// Scale interval for t, already clipped to (eps, 1-eps); empty iff lo >= hi.
std::pair<double, double> scale_interval(const ProblemInstance& instance) {
  const double sum_cap = instance.total_cap();
  const double sum_dem = instance.total_dem();
  double lo = (sum_dem - instance.p_omax()) / sum_cap;
  double hi = (sum_dem + instance.p_omax()) / sum_cap;
  lo = std::max(lo, kInteriorMargin);
  hi = std::min(hi, 1.0 - kInteriorMargin);
  return {lo, hi};
}

}  // namespace

bool has_interior(const ProblemInstance& instance) {
  const auto [lo, hi] = scale_interval(instance);
  return lo < hi;
}

DecisionVector compute_interior_point(const ProblemInstance& instance) {
  const auto [lo, hi] = scale_interval(instance);
  if (!(lo < hi)) {
    throw InfeasibleError(
        "compute_interior_point: empty interior (infeasible or degenerate "
        "instance)");
  }
  const double t = 0.5 * (lo + hi);
  DecisionVector u0(instance.n_agents());
  for (int i = 0; i < instance.n_agents(); ++i) {
    u0(i) = t * instance.agent(i).p_cap;
  }
  opcount::add(static_cast<std::uint64_t>(instance.n_agents()) + 8);
  return u0;
}

GaugeData build_gauge_data(const ProblemInstance& instance,
                           const DecisionVector& u0) {
  const int n = instance.n_agents();
  if (u0.size() != n) {
    throw DimensionError("build_gauge_data: u0 length mismatch");
  }
  std::vector<GaugeRow> rows;
  rows.reserve(2 * static_cast<std::size_t>(n) + 2);
  std::vector<double> net_terms(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    rows.push_back({{{i, 1.0}}, instance.agent(i).p_cap - u0(i)});
    rows.push_back({{{i, -1.0}}, u0(i)});
    net_terms[static_cast<std::size_t>(i)] = u0(i) - instance.agent(i).p_dem;
  }
  const double net0 = set_sum(net_terms);
  GaugeRow up, down;
  up.coeffs.reserve(static_cast<std::size_t>(n));
  down.coeffs.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    up.coeffs.emplace_back(i, 1.0);
    down.coeffs.emplace_back(i, -1.0);
  }
  up.slack = instance.p_omax() - net0;
  down.slack = instance.p_omax() + net0;
  rows.push_back(std::move(up));
  rows.push_back(std::move(down));
  opcount::add(4 * static_cast<std::uint64_t>(n) + 4);
  return GaugeData(u0, std::move(rows));  // slack validation happens here
}

double gauge_psi(const GaugeData& gd, const DecisionVector& v) {
  if (v.size() != gd.dim()) {
    throw DimensionError("gauge_psi: dimension mismatch");
  }
  double worst = 0.0;
  for (const auto& row : gd.rows()) {
    worst = std::max(worst, row_value(row, v));
  }
  return worst;
}

DecisionVector gauge_map(const GaugeData& gd, const DecisionVector& v) {
  const double psi = gauge_psi(gd, v);
  opcount::add(static_cast<std::uint64_t>(gd.dim()) * 2);
  if (psi <= 1.0) {
    return gd.interior_point() + v;
  }
  return gd.interior_point() + v / psi;
}

DecisionVector gauge_map_backward(const GaugeData& gd, const DecisionVector& v,
                                  const DecisionVector& upstream) {
  if (v.size() != gd.dim() || upstream.size() != gd.dim()) {
    throw DimensionError("gauge_map_backward: dimension mismatch");
  }
  double psi = 0.0;
  const GaugeRow* active = nullptr;
  for (const auto& row : gd.rows()) {
    const double val = row_value(row, v);
    if (val > psi) {  // strict: first attaining row wins ties
      psi = val;
      active = &row;
    }
  }
  if (psi <= 1.0) {
    return upstream;  // pass-through region, u = u0 + v
  }
  // u = u0 + v / psi(v);  dpsi/dv = a_r* / h_r* at the active row.
  DecisionVector grad = upstream / psi;
  const double inner = upstream.dot(v) / (psi * psi);
  for (const auto& [idx, c] : active->coeffs) {
    grad(idx) -= inner * c / active->slack;
  }
  return grad;
}

EliminationMap eliminate_equalities(const GeneralLinearSpec& spec) {
  const int n = spec.total_dim();
  const int m = spec.n_equality_rows();

  if (m == 0) {
    return EliminationMap{Eigen::VectorXd::Zero(n),
                          Eigen::MatrixXd::Identity(n, n), spec};
  }

  // Gauss-Jordan with partial pivoting on [A | rhs], rhs = -B_eq.
  Eigen::MatrixXd a = spec.stacked_eq_matrix();
  Eigen::VectorXd rhs = -spec.stacked_eq_offset();
  std::vector<int> pivot_cols;
  int row = 0;
  for (int col = 0; col < n && row < m; ++col) {
    int best = row;
    for (int r = row + 1; r < m; ++r) {
      if (std::abs(a(r, col)) > std::abs(a(best, col))) best = r;
    }
    if (std::abs(a(best, col)) <= kPivotTol) continue;  // free column
    if (best != row) {
      a.row(best).swap(a.row(row));
      std::swap(rhs(best), rhs(row));
    }
    const double pivot = a(row, col);
    a.row(row) /= pivot;
    rhs(row) /= pivot;
    for (int r = 0; r < m; ++r) {
      if (r == row) continue;
      const double factor = a(r, col);
      if (factor != 0.0) {
        a.row(r) -= factor * a.row(row);
        rhs(r) -= factor * rhs(row);
      }
    }
    pivot_cols.push_back(col);
    ++row;
  }
  const int rank = row;
  for (int r = rank; r < m; ++r) {
    if (std::abs(rhs(r)) > kPivotTol) {
      throw InfeasibleError("eliminate_equalities: inconsistent equality rows");
    }
  }

  std::vector<int> free_cols;
  {
    std::vector<bool> is_pivot(static_cast<std::size_t>(n), false);
    for (int c : pivot_cols) is_pivot[static_cast<std::size_t>(c)] = true;
    for (int c = 0; c < n; ++c) {
      if (!is_pivot[static_cast<std::size_t>(c)]) free_cols.push_back(c);
    }
  }
  const int n_free = static_cast<int>(free_cols.size());

  Eigen::VectorXd particular = Eigen::VectorXd::Zero(n);
  for (int r = 0; r < rank; ++r) {
    particular(pivot_cols[static_cast<std::size_t>(r)]) = rhs(r);
  }
  Eigen::MatrixXd basis = Eigen::MatrixXd::Zero(n, n_free);
  for (int k = 0; k < n_free; ++k) {
    const int f = free_cols[static_cast<std::size_t>(k)];
    basis(f, k) = 1.0;
    for (int r = 0; r < rank; ++r) {
      basis(pivot_cols[static_cast<std::size_t>(r)], k) = -a(r, f);
    }
  }

  // Rewrite inequality and coupled rows over z. Per-agent structure is lost
  // once variables mix, so everything lands in a single block.
  AgentBlock reduced;
  reduced.a_eq.resize(0, n_free);
  reduced.b_eq.resize(0);
  const Eigen::MatrixXd ineq = spec.stacked_ineq_matrix();
  reduced.a_ineq = ineq * basis;
  reduced.b_ineq = ineq * particular + spec.stacked_ineq_offset();
  const Eigen::MatrixXd cpl = spec.coupled_matrix();
  reduced.a_cpl = cpl * basis;
  reduced.b_cpl = cpl * particular + spec.coupled_offset();
  return EliminationMap{std::move(particular), std::move(basis),
                        GeneralLinearSpec({std::move(reduced)})};
}

}  // namespace vppnet
