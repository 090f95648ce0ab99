#include "vppnet/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "vppnet/gauge.hpp"
#include "vppnet/oracle.hpp"

namespace vppnet {

namespace {

constexpr int kMaxRejections = 1000;  // per sample

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

}  // namespace

void DataGenConfig::validate() const {
  if (n_agents_max < 1) {
    throw ConfigError("n_agents_max", "n_agents_max must be >= 1");
  }
  if (subset_min < 1 || subset_min > n_agents_max) {
    throw ConfigError("subset_min",
                      "subset_min must be in [1, n_agents_max]");
  }
  if (!(cap_low > 0.0)) {
    throw ConfigError("cap_low", "cap_low must be positive");
  }
  if (!(cap_low < cap_high)) {
    throw ConfigError("cap_high", "cap_high must exceed cap_low");
  }
  if (!(fluctuation >= 0.0 && fluctuation < 1.0)) {
    throw ConfigError("fluctuation", "fluctuation must be in [0, 1)");
  }
  if (n_samples < 1) {
    throw ConfigError("n_samples", "n_samples must be >= 1");
  }
  if (n_test < 0 || n_test > n_samples) {
    throw ConfigError("n_test", "n_test must be in [0, n_samples]");
  }
  if (!(p_omax > 0.0)) {
    throw ConfigError("p_omax", "p_omax must be positive");
  }
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs", "epochs must be >= 1");
  if (batch_size < 1) {
    throw ConfigError("batch_size", "batch_size must be >= 1");
  }
  if (!(learning_rate >= 0.0)) {
    throw ConfigError("learning_rate", "learning_rate must be >= 0");
  }
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0)) {
    throw ConfigError("adam_beta1", "adam_beta1 must be in [0, 1)");
  }
  if (!(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw ConfigError("adam_beta2", "adam_beta2 must be in [0, 1)");
  }
  if (!(adam_epsilon > 0.0)) {
    throw ConfigError("adam_epsilon", "adam_epsilon must be positive");
  }
}

GenerationResult generate_dataset(const DataGenConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  const int m = cfg.n_agents_max;
  std::vector<double> base_cap(static_cast<std::size_t>(m));
  std::vector<double> base_dem(static_cast<std::size_t>(m));
  for (int j = 0; j < m; ++j) {
    base_cap[static_cast<std::size_t>(j)] = rng.uniform(cfg.cap_low, cfg.cap_high);
    base_dem[static_cast<std::size_t>(j)] = rng.uniform(cfg.cap_low, cfg.cap_high);
  }

  GenerationResult result;
  result.instances.reserve(static_cast<std::size_t>(cfg.n_samples));
  std::vector<int> indices(static_cast<std::size_t>(m));
  for (int s = 0; s < cfg.n_samples; ++s) {
    bool accepted = false;
    for (int attempt = 0; attempt < kMaxRejections; ++attempt) {
      std::vector<AgentInput> all(static_cast<std::size_t>(m));
      for (int j = 0; j < m; ++j) {
        const double fc = rng.uniform(1.0 - cfg.fluctuation, 1.0 + cfg.fluctuation);
        const double fd = rng.uniform(1.0 - cfg.fluctuation, 1.0 + cfg.fluctuation);
        all[static_cast<std::size_t>(j)] = {
            base_cap[static_cast<std::size_t>(j)] * fc,
            base_dem[static_cast<std::size_t>(j)] * fd};
      }
      const int k = rng.uniform_int(cfg.subset_min, m);
      for (int j = 0; j < m; ++j) indices[static_cast<std::size_t>(j)] = j;
      rng.shuffle(indices);
      std::vector<int> subset(indices.begin(), indices.begin() + k);
      std::sort(subset.begin(), subset.end());
      std::vector<AgentInput> agents;
      agents.reserve(static_cast<std::size_t>(k));
      for (int j : subset) agents.push_back(all[static_cast<std::size_t>(j)]);
      ProblemInstance inst(std::move(agents), cfg.p_omax);
      if (inst.is_feasible() && has_interior(inst)) {
        result.instances.push_back(std::move(inst));
        accepted = true;
        break;
      }
      ++result.rejections;
    }
    if (!accepted) {
      throw NumericError("generate_dataset: sample " + std::to_string(s) +
                         " rejected " + std::to_string(kMaxRejections) +
                         " times");
    }
  }
  return result;
}

std::vector<SetBatch> group_by_agent_count(
    const std::vector<ProblemInstance>& data, const std::vector<int>& order,
    int batch_size) {
  std::map<int, std::vector<int>> buckets;
  for (int id : order) {
    buckets[data[static_cast<std::size_t>(id)].n_agents()].push_back(id);
  }
  std::vector<SetBatch> batches;
  for (const auto& [n, ids] : buckets) {
    for (std::size_t at = 0; at < ids.size(); at += static_cast<std::size_t>(batch_size)) {
      SetBatch b;
      b.n_agents = n;
      const auto end = std::min(ids.size(), at + static_cast<std::size_t>(batch_size));
      b.sample_ids.assign(ids.begin() + static_cast<std::ptrdiff_t>(at),
                          ids.begin() + static_cast<std::ptrdiff_t>(end));
      batches.push_back(std::move(b));
    }
  }
  return batches;
}

TrainResult train(ModelParams params, const std::vector<ProblemInstance>& data,
                  const TrainConfig& cfg) {
  if (cfg.loss_mode == LossMode::kObjective) {
    return train(std::move(params), data, cfg,
                 [](int, const ProblemInstance& inst, const DecisionVector& u,
                    DecisionVector& grad) {
                   for (int i = 0; i < u.size(); ++i) {
                     grad(i) = 2.0 * (u(i) - inst.agent(i).p_cap);
                   }
                   return objective(inst, u);
                 });
  }

  // Supervised mode: relative error against exact-solver labels.
  std::vector<DecisionVector> labels;
  std::vector<double> label_norm2;
  labels.reserve(data.size());
  label_norm2.reserve(data.size());
  for (const auto& inst : data) {
    labels.push_back(solve_exact(inst));
    label_norm2.push_back(labels.back().squaredNorm());
    if (label_norm2.back() == 0.0) {
      throw UndefinedGapError(
          "train: supervised label with zero norm; relative loss undefined");
    }
  }
  return train(std::move(params), data, cfg,
               [labels = std::move(labels), label_norm2 = std::move(label_norm2)](
                   int id, const ProblemInstance&, const DecisionVector& u,
                   DecisionVector& grad) {
                 const DecisionVector& u_star =
                     labels[static_cast<std::size_t>(id)];
                 const double norm2 =
                     label_norm2[static_cast<std::size_t>(id)];
                 grad = 2.0 * (u - u_star) / norm2;
                 return (u - u_star).squaredNorm() / norm2;
               });
}

TrainResult train(ModelParams params, const std::vector<ProblemInstance>& data,
                  const TrainConfig& cfg, const SampleLoss& sample_loss) {
  cfg.validate();
  if (data.empty()) {
    throw std::invalid_argument("train: empty dataset");
  }

  const Eigen::Index n_params = static_cast<Eigen::Index>(params.n_params());
  Eigen::VectorXd flat = params.to_flat();
  Eigen::VectorXd adam_m = Eigen::VectorXd::Zero(n_params);
  Eigen::VectorXd adam_v = Eigen::VectorXd::Zero(n_params);
  long step = 0;

  Rng rng(cfg.seed);
  std::vector<int> order(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) order[i] = static_cast<int>(i);

  TrainResult result;
  result.epoch_loss.reserve(static_cast<std::size_t>(cfg.epochs));
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    std::vector<SetBatch> batches = group_by_agent_count(data, order, cfg.batch_size);
    double epoch_loss_sum = 0.0;
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      const SetBatch& batch = batches[bi];
      Eigen::VectorXd grad_sum = Eigen::VectorXd::Zero(n_params);
      double batch_loss_sum = 0.0;
      for (int id : batch.sample_ids) {
        const ProblemInstance& inst = data[static_cast<std::size_t>(id)];
        const DecisionVector u0 = compute_interior_point(inst);
        const GaugeData gd = build_gauge_data(inst, u0);
        ForwardCache cache;
        const DecisionVector v = forward(params, inst, &cache);
        const DecisionVector u = gauge_map(gd, v);

        DecisionVector dloss_du(u.size());
        const double loss = sample_loss(id, inst, u, dloss_du);
        if (!std::isfinite(loss)) {
          throw NumericError("train: non-finite loss at epoch " +
                             std::to_string(epoch) + " batch " +
                             std::to_string(bi));
        }
        batch_loss_sum += loss;
        const DecisionVector dloss_dv = gauge_map_backward(gd, v, dloss_du);
        const ModelParams sample_grads = backward(params, cache, dloss_dv);
        grad_sum += sample_grads.to_flat();
      }
      epoch_loss_sum += batch_loss_sum;

      const double inv_batch = 1.0 / static_cast<double>(batch.sample_ids.size());
      const Eigen::VectorXd grad = grad_sum * inv_batch;
      ++step;
      adam_m = cfg.adam_beta1 * adam_m + (1.0 - cfg.adam_beta1) * grad;
      adam_v = cfg.adam_beta2 * adam_v +
               (1.0 - cfg.adam_beta2) * grad.cwiseProduct(grad);
      const double bias1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(step));
      const double bias2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(step));
      flat.array() -= cfg.learning_rate * (adam_m.array() / bias1) /
                      ((adam_v.array() / bias2).sqrt() + cfg.adam_epsilon);
      params = ModelParams::from_flat(params.hyper, flat);
    }
    result.epoch_loss.push_back(epoch_loss_sum / static_cast<double>(data.size()));
  }
  result.params = std::move(params);
  return result;
}

EvalAggregates EvalReport::aggregates() const {
  EvalAggregates agg;
  agg.n_samples = static_cast<int>(rows.size());
  if (rows.empty()) return agg;
  const double inf = std::numeric_limits<double>::infinity();
  agg.opt_gap_min = agg.feas_gap_min = agg.model_time_min = agg.oracle_time_min = inf;
  agg.opt_gap_max = agg.feas_gap_max = agg.model_time_max = agg.oracle_time_max = -inf;
  for (const auto& r : rows) {
    agg.opt_gap_avg += r.opt_gap;
    agg.feas_gap_avg += r.feas_gap_kw;
    agg.model_time_avg += r.model_time_us;
    agg.oracle_time_avg += r.oracle_time_us;
    agg.opt_gap_min = std::min(agg.opt_gap_min, r.opt_gap);
    agg.opt_gap_max = std::max(agg.opt_gap_max, r.opt_gap);
    agg.feas_gap_min = std::min(agg.feas_gap_min, r.feas_gap_kw);
    agg.feas_gap_max = std::max(agg.feas_gap_max, r.feas_gap_kw);
    agg.model_time_min = std::min(agg.model_time_min, r.model_time_us);
    agg.model_time_max = std::max(agg.model_time_max, r.model_time_us);
    agg.oracle_time_min = std::min(agg.oracle_time_min, r.oracle_time_us);
    agg.oracle_time_max = std::max(agg.oracle_time_max, r.oracle_time_us);
    if (r.degenerate_reference) ++agg.degenerate_count;
  }
  const double n = static_cast<double>(rows.size());
  agg.opt_gap_avg /= n;
  agg.feas_gap_avg /= n;
  agg.model_time_avg /= n;
  agg.oracle_time_avg /= n;
  return agg;
}

EvalReport evaluate(const ModelParams& params,
                    const std::vector<ProblemInstance>& test_set,
                    bool with_timing) {
  EvalReport report;
  report.rows.reserve(test_set.size());
  for (std::size_t s = 0; s < test_set.size(); ++s) {
    const ProblemInstance& inst = test_set[s];
    const DecisionVector u = predict(params, inst);
    const DecisionVector u_star = solve_exact(inst);

    EvalRow row;
    row.sample_id = static_cast<int>(s);
    row.n_agents = inst.n_agents();
    row.feas_gap_kw = feasibility_gap(inst, u);
    if (u_star.squaredNorm() == 0.0) {
      row.opt_gap = (u - u_star).squaredNorm();
      row.degenerate_reference = true;
    } else {
      row.opt_gap = optimality_gap(u, u_star);
    }
    if (with_timing) {
      const TimingReport t = time_solver(inst, params);
      row.model_time_us = t.model_us;
      row.oracle_time_us = t.oracle_us;
    }
    report.rows.push_back(row);
    for (int i = 0; i < inst.n_agents(); ++i) {
      report.spectra.push_back(
          {static_cast<int>(s), i, u(i), u_star(i)});
    }
  }
  return report;
}

void write_dataset(std::ostream& os,
                   const std::vector<ProblemInstance>& instances,
                   const std::string& header) {
  if (!header.empty()) os << "# " << header << "\n";
  for (const auto& inst : instances) {
    nlohmann::ordered_json rec;
    rec["p_omax"] = inst.p_omax();
    rec["agents"] = nlohmann::ordered_json::array();
    for (const auto& a : inst.agents()) {
      rec["agents"].push_back({{"p_cap", a.p_cap}, {"p_dem", a.p_dem}});
    }
    os << rec.dump() << "\n";
  }
}

std::vector<ProblemInstance> read_dataset(std::istream& is) {
  std::vector<ProblemInstance> instances;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line.front() == '#') continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw std::runtime_error("dataset line " + std::to_string(lineno) +
                               ": " + e.what());
    }
    if (!rec.is_object() || !rec.contains("p_omax") || !rec.contains("agents")) {
      throw std::runtime_error("dataset line " + std::to_string(lineno) +
                               ": expected {p_omax, agents}");
    }
    for (const auto& kv : rec.items()) {
      if (kv.key() != "p_omax" && kv.key() != "agents") {
        throw std::runtime_error("dataset line " + std::to_string(lineno) +
                                 ": unknown field '" + kv.key() + "'");
      }
    }
    std::vector<AgentInput> agents;
    for (const auto& a : rec["agents"]) {
      for (const auto& kv : a.items()) {
        if (kv.key() != "p_cap" && kv.key() != "p_dem") {
          throw std::runtime_error("dataset line " + std::to_string(lineno) +
                                   ": unknown agent field '" + kv.key() + "'");
        }
      }
      agents.push_back({a.at("p_cap").get<double>(), a.at("p_dem").get<double>()});
    }
    instances.emplace_back(std::move(agents), rec.at("p_omax").get<double>());
  }
  return instances;
}

void write_eval_csv(std::ostream& os, const EvalReport& report,
                    const std::string& header) {
  if (!header.empty()) os << "# " << header << "\n";
  os << "sample_id,n_agents,opt_gap,feas_gap_kw,model_time_us,oracle_time_us\n";
  for (const auto& r : report.rows) {
    os << r.sample_id << ',' << r.n_agents << ',' << fmt(r.opt_gap) << ','
       << fmt(r.feas_gap_kw) << ',' << fmt(r.model_time_us) << ','
       << fmt(r.oracle_time_us) << "\n";
  }
}

void write_spectra_csv(std::ostream& os, const EvalReport& report,
                       const std::string& header) {
  if (!header.empty()) os << "# " << header << "\n";
  os << "sample_id,agent_idx,u_model_kw,u_star_kw\n";
  for (const auto& r : report.spectra) {
    os << r.sample_id << ',' << r.agent_idx << ',' << fmt(r.u_model_kw) << ','
       << fmt(r.u_star_kw) << "\n";
  }
}

void write_aggregate_record(std::ostream& os, const EvalAggregates& agg,
                            const std::string& header) {
  if (!header.empty()) os << "# " << header << "\n";
  os << "n_samples=" << agg.n_samples << "\n";
  os << "opt_gap_avg=" << fmt(agg.opt_gap_avg) << "\n";
  os << "opt_gap_min=" << fmt(agg.opt_gap_min) << "\n";
  os << "opt_gap_max=" << fmt(agg.opt_gap_max) << "\n";
  os << "feas_gap_kw_avg=" << fmt(agg.feas_gap_avg) << "\n";
  os << "feas_gap_kw_min=" << fmt(agg.feas_gap_min) << "\n";
  os << "feas_gap_kw_max=" << fmt(agg.feas_gap_max) << "\n";
  os << "model_time_us_avg=" << fmt(agg.model_time_avg) << "\n";
  os << "model_time_us_min=" << fmt(agg.model_time_min) << "\n";
  os << "model_time_us_max=" << fmt(agg.model_time_max) << "\n";
  os << "oracle_time_us_avg=" << fmt(agg.oracle_time_avg) << "\n";
  os << "oracle_time_us_min=" << fmt(agg.oracle_time_min) << "\n";
  os << "oracle_time_us_max=" << fmt(agg.oracle_time_max) << "\n";
  os << "degenerate_opt_gap_count=" << agg.degenerate_count << "\n";
}

}  // namespace vppnet
