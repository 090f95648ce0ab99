#include "vppnet/core.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace vppnet {

namespace {

std::vector<double> collect(const std::vector<AgentInput>& agents,
                            double AgentInput::*field) {
  std::vector<double> out;
  out.reserve(agents.size());
  for (const auto& a : agents) out.push_back(a.*field);
  return out;
}

void check_length(const ProblemInstance& instance, const DecisionVector& u,
                  const char* op) {
  if (u.size() != instance.n_agents()) {
    throw DimensionError(std::string(op) + ": decision vector length " +
                         std::to_string(u.size()) + " != agent count " +
                         std::to_string(instance.n_agents()));
  }
}

}  // namespace

ProblemInstance::ProblemInstance(std::vector<AgentInput> agents, double p_omax)
    : agents_(std::move(agents)), p_omax_(p_omax) {
  if (agents_.empty()) {
    throw std::invalid_argument("ProblemInstance: needs at least one agent");
  }
  if (!(p_omax_ > 0.0) || !std::isfinite(p_omax_)) {
    throw std::invalid_argument("ProblemInstance: p_omax must be positive");
  }
  for (std::size_t i = 0; i < agents_.size(); ++i) {
    const auto& a = agents_[i];
    if (!(a.p_cap > 0.0) || !std::isfinite(a.p_cap)) {
      throw std::invalid_argument("ProblemInstance: agent " +
                                  std::to_string(i) +
                                  " p_cap must be positive");
    }
    if (!(a.p_dem >= 0.0) || !std::isfinite(a.p_dem)) {
      throw std::invalid_argument("ProblemInstance: agent " +
                                  std::to_string(i) +
                                  " p_dem must be nonnegative");
    }
  }
  total_cap_ = set_sum(collect(agents_, &AgentInput::p_cap));
  total_dem_ = set_sum(collect(agents_, &AgentInput::p_dem));
}

Eigen::VectorXd ProblemInstance::cap_vector() const {
  Eigen::VectorXd v(n_agents());
  for (int i = 0; i < n_agents(); ++i) v(i) = agent(i).p_cap;
  return v;
}

Eigen::VectorXd ProblemInstance::dem_vector() const {
  Eigen::VectorXd v(n_agents());
  for (int i = 0; i < n_agents(); ++i) v(i) = agent(i).p_dem;
  return v;
}

Permutation::Permutation(std::vector<int> perm) : perm_(std::move(perm)) {
  const int n = static_cast<int>(perm_.size());
  if (n == 0) throw std::invalid_argument("Permutation: empty");
  std::vector<bool> seen(static_cast<std::size_t>(n), false);
  for (int p : perm_) {
    if (p < 0 || p >= n || seen[static_cast<std::size_t>(p)]) {
      throw std::invalid_argument("Permutation: not a bijection on {0..N-1}");
    }
    seen[static_cast<std::size_t>(p)] = true;
  }
}

Permutation Permutation::identity(int n) {
  std::vector<int> p(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) p[static_cast<std::size_t>(i)] = i;
  return Permutation(std::move(p));
}

Permutation Permutation::random(int n, Rng& rng) {
  std::vector<int> p(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) p[static_cast<std::size_t>(i)] = i;
  rng.shuffle(p);
  return Permutation(std::move(p));
}

Permutation Permutation::inverse() const {
  std::vector<int> inv(perm_.size());
  for (int i = 0; i < size(); ++i) {
    inv[static_cast<std::size_t>(perm_[static_cast<std::size_t>(i)])] = i;
  }
  return Permutation(std::move(inv));
}

GeneralLinearSpec::GeneralLinearSpec(std::vector<AgentBlock> blocks)
    : blocks_(std::move(blocks)) {
  if (blocks_.empty()) {
    throw std::invalid_argument("GeneralLinearSpec: needs at least one agent");
  }
  n_coupled_rows_ = static_cast<int>(blocks_.front().a_cpl.rows());
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const auto& b = blocks_[i];
    const auto d = b.a_cpl.cols();
    const std::string where = "GeneralLinearSpec: agent " + std::to_string(i);
    if (b.a_eq.rows() != b.b_eq.size() || (b.a_eq.rows() > 0 && b.a_eq.cols() != d)) {
      throw DimensionError(where + ": equality block shape mismatch");
    }
    if (b.a_ineq.rows() != b.b_ineq.size() ||
        (b.a_ineq.rows() > 0 && b.a_ineq.cols() != d)) {
      throw DimensionError(where + ": inequality block shape mismatch");
    }
    if (b.a_cpl.rows() != n_coupled_rows_ || b.b_cpl.size() != n_coupled_rows_) {
      throw DimensionError(where + ": coupled block row count mismatch");
    }
    total_dim_ += static_cast<int>(d);
  }
}

int GeneralLinearSpec::dim_of(int i) const {
  return static_cast<int>(blocks_[static_cast<std::size_t>(i)].a_cpl.cols());
}

int GeneralLinearSpec::n_equality_rows() const {
  int m = 0;
  for (const auto& b : blocks_) m += static_cast<int>(b.a_eq.rows());
  return m;
}

double GeneralLinearSpec::max_violation(const Eigen::VectorXd& u) const {
  if (u.size() != total_dim_) {
    throw DimensionError("GeneralLinearSpec::max_violation: size mismatch");
  }
  double worst = 0.0;
  std::vector<std::vector<double>> coupled_terms(
      static_cast<std::size_t>(n_coupled_rows_));
  int offset = 0;
  for (const auto& b : blocks_) {
    const int d = static_cast<int>(b.a_cpl.cols());
    const Eigen::VectorXd ui = u.segment(offset, d);
    if (b.a_eq.rows() > 0) {
      worst = std::max(worst, (b.a_eq * ui + b.b_eq).cwiseAbs().maxCoeff());
    }
    if (b.a_ineq.rows() > 0) {
      worst = std::max(worst, (b.a_ineq * ui + b.b_ineq).maxCoeff());
    }
    if (n_coupled_rows_ > 0) {
      const Eigen::VectorXd contrib = b.a_cpl * ui + b.b_cpl;
      for (int r = 0; r < n_coupled_rows_; ++r) {
        coupled_terms[static_cast<std::size_t>(r)].push_back(contrib(r));
      }
    }
    offset += d;
  }
  for (const auto& terms : coupled_terms) {
    worst = std::max(worst, set_sum(terms));
  }
  return std::max(0.0, worst);
}

Eigen::MatrixXd GeneralLinearSpec::stacked_eq_matrix() const {
  int rows = n_equality_rows();
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(rows, total_dim_);
  int r = 0, c = 0;
  for (const auto& b : blocks_) {
    if (b.a_eq.rows() > 0) {
      m.block(r, c, b.a_eq.rows(), b.a_eq.cols()) = b.a_eq;
    }
    r += static_cast<int>(b.a_eq.rows());
    c += static_cast<int>(b.a_cpl.cols());
  }
  return m;
}

Eigen::VectorXd GeneralLinearSpec::stacked_eq_offset() const {
  Eigen::VectorXd v(n_equality_rows());
  int r = 0;
  for (const auto& b : blocks_) {
    v.segment(r, b.b_eq.size()) = b.b_eq;
    r += static_cast<int>(b.b_eq.size());
  }
  return v;
}

Eigen::MatrixXd GeneralLinearSpec::stacked_ineq_matrix() const {
  int rows = 0;
  for (const auto& b : blocks_) rows += static_cast<int>(b.a_ineq.rows());
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(rows, total_dim_);
  int r = 0, c = 0;
  for (const auto& b : blocks_) {
    if (b.a_ineq.rows() > 0) {
      m.block(r, c, b.a_ineq.rows(), b.a_ineq.cols()) = b.a_ineq;
    }
    r += static_cast<int>(b.a_ineq.rows());
    c += static_cast<int>(b.a_cpl.cols());
  }
  return m;
}

Eigen::VectorXd GeneralLinearSpec::stacked_ineq_offset() const {
  int rows = 0;
  for (const auto& b : blocks_) rows += static_cast<int>(b.b_ineq.size());
  Eigen::VectorXd v(rows);
  int r = 0;
  for (const auto& b : blocks_) {
    v.segment(r, b.b_ineq.size()) = b.b_ineq;
    r += static_cast<int>(b.b_ineq.size());
  }
  return v;
}

Eigen::MatrixXd GeneralLinearSpec::coupled_matrix() const {
  Eigen::MatrixXd m(n_coupled_rows_, total_dim_);
  int c = 0;
  for (const auto& b : blocks_) {
    m.block(0, c, n_coupled_rows_, b.a_cpl.cols()) = b.a_cpl;
    c += static_cast<int>(b.a_cpl.cols());
  }
  return m;
}

Eigen::VectorXd GeneralLinearSpec::coupled_offset() const {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(n_coupled_rows_);
  for (int r = 0; r < n_coupled_rows_; ++r) {
    std::vector<double> terms;
    terms.reserve(blocks_.size());
    for (const auto& b : blocks_) terms.push_back(b.b_cpl(r));
    v(r) = set_sum(terms);
  }
  return v;
}

double objective(const ProblemInstance& instance, const DecisionVector& u) {
  check_length(instance, u, "objective");
  std::vector<double> terms(static_cast<std::size_t>(u.size()));
  for (int i = 0; i < u.size(); ++i) {
    const double r = u(i) - instance.agent(i).p_cap;
    terms[static_cast<std::size_t>(i)] = r * r;
  }
  return set_sum(terms);
}

double feasibility_gap(const ProblemInstance& instance,
                       const DecisionVector& u) {
  check_length(instance, u, "feasibility_gap");
  double worst = 0.0;
  std::vector<double> net_terms(static_cast<std::size_t>(u.size()));
  for (int i = 0; i < u.size(); ++i) {
    worst = std::max(worst, -u(i));
    worst = std::max(worst, u(i) - instance.agent(i).p_cap);
    net_terms[static_cast<std::size_t>(i)] = u(i) - instance.agent(i).p_dem;
  }
  const double net = set_sum(net_terms);
  worst = std::max(worst, net - instance.p_omax());
  worst = std::max(worst, -net - instance.p_omax());
  return std::max(0.0, worst);
}

double optimality_gap(const DecisionVector& u, const DecisionVector& u_star) {
  if (u.size() != u_star.size()) {
    throw DimensionError("optimality_gap: length mismatch");
  }
  std::vector<double> num(static_cast<std::size_t>(u.size()));
  std::vector<double> den(static_cast<std::size_t>(u.size()));
  for (int i = 0; i < u.size(); ++i) {
    const double d = u(i) - u_star(i);
    num[static_cast<std::size_t>(i)] = d * d;
    den[static_cast<std::size_t>(i)] = u_star(i) * u_star(i);
  }
  const double denom = set_sum(den);
  if (denom == 0.0) {
    throw UndefinedGapError("optimality_gap: reference solution has zero norm");
  }
  return set_sum(num) / denom;
}

ProblemInstance apply_permutation(const Permutation& perm,
                                  const ProblemInstance& instance) {
  if (perm.size() != instance.n_agents()) {
    throw DimensionError("apply_permutation: size mismatch");
  }
  std::vector<AgentInput> agents(static_cast<std::size_t>(perm.size()));
  for (int i = 0; i < perm.size(); ++i) {
    agents[static_cast<std::size_t>(i)] = instance.agent(perm(i));
  }
  return ProblemInstance(std::move(agents), instance.p_omax());
}

DecisionVector apply_permutation(const Permutation& perm,
                                 const DecisionVector& u) {
  if (perm.size() != u.size()) {
    throw DimensionError("apply_permutation: size mismatch");
  }
  DecisionVector out(u.size());
  for (int i = 0; i < perm.size(); ++i) out(i) = u(perm(i));
  return out;
}

GeneralLinearSpec to_general_spec(const ProblemInstance& instance) {
  const int n = instance.n_agents();
  const double omax_share = instance.p_omax() / n;
  std::vector<AgentBlock> blocks(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    AgentBlock& b = blocks[static_cast<std::size_t>(i)];
    b.a_eq.resize(0, 1);
    b.b_eq.resize(0);
    b.a_ineq.resize(2, 1);
    b.a_ineq << -1.0, 1.0;
    b.b_ineq.resize(2);
    b.b_ineq << 0.0, -instance.agent(i).p_cap;
    b.a_cpl.resize(2, 1);
    b.a_cpl << 1.0, -1.0;
    b.b_cpl.resize(2);
    b.b_cpl << -instance.agent(i).p_dem - omax_share,
        instance.agent(i).p_dem - omax_share;
  }
  return GeneralLinearSpec(std::move(blocks));
}

}  // namespace vppnet
