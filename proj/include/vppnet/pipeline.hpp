#ifndef VPPNET_PIPELINE_HPP
#define VPPNET_PIPELINE_HPP

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "vppnet/core.hpp"
#include "vppnet/neural.hpp"

namespace vppnet {

struct DataGenConfig {
  int n_agents_max = 20;
  double cap_low = 10.0;   ///< kW
  double cap_high = 25.0;  ///< kW
  double fluctuation = 0.10;
  int n_samples = 400;
  int n_test = 100;
  int subset_min = 5;
  double p_omax = 100.0;  ///< kW
  std::uint64_t seed = 1;

  void validate() const;  // throws ConfigError naming the offending field
};

enum class LossMode { kObjective, kSupervised };

struct TrainConfig {
  LossMode loss_mode = LossMode::kObjective;
  int epochs = 500;
  int batch_size = 32;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::uint64_t seed = 1;

  void validate() const;
};

struct GenerationResult {
  std::vector<ProblemInstance> instances;
  int rejections = 0;  ///< infeasible draws that were resampled
};

/// Draws base capability/demand per agent once, then per sample applies
/// independent multiplicative fluctuation and keeps a uniformly random
/// subset of agents. Infeasible (or interior-less) draws are rejected and
/// resampled, at most 1000 times per sample. Deterministic given the seed.
GenerationResult generate_dataset(const DataGenConfig& cfg);

/// Samples sharing one agent count, for equal-N minibatching.
struct SetBatch {
  int n_agents = 0;
  std::vector<int> sample_ids;
};

/// Buckets sample indices by agent count and chunks each bucket into batches
/// of at most batch_size, preserving the given index order within buckets.
std::vector<SetBatch> group_by_agent_count(
    const std::vector<ProblemInstance>& data, const std::vector<int>& order,
    int batch_size);

struct TrainResult {
  ModelParams params;
  std::vector<double> epoch_loss;  ///< mean per-sample loss per epoch
};

/// Per-sample loss for training: returns the loss of the feasible dispatch u
/// for the given sample and fills grad with dloss/du. The two built-in modes
/// route through this; custom objectives can be trained by supplying one.
using SampleLoss = std::function<double(
    int sample_id, const ProblemInstance& instance, const DecisionVector& u,
    DecisionVector& grad)>;

/// Adam on either the raw dispatch objective of the feasibility-mapped
/// prediction (no labels needed) or the supervised relative error against
/// exact-solver labels. Batches are grouped by equal N; sample order is
/// reshuffled each epoch from cfg.seed. Throws NumericError (with epoch and
/// batch index) if the loss goes non-finite.
TrainResult train(ModelParams params, const std::vector<ProblemInstance>& data,
                  const TrainConfig& cfg);

/// As train(), but minimizing a caller-supplied per-sample loss.
TrainResult train(ModelParams params, const std::vector<ProblemInstance>& data,
                  const TrainConfig& cfg, const SampleLoss& loss);

struct EvalRow {
  int sample_id = 0;
  int n_agents = 0;
  double opt_gap = 0.0;
  double feas_gap_kw = 0.0;
  double model_time_us = 0.0;
  double oracle_time_us = 0.0;
  /// Set when ||u*|| = 0 and opt_gap holds the absolute squared error
  /// instead of the relative gap.
  bool degenerate_reference = false;
};

struct SpectrumRow {
  int sample_id = 0;
  int agent_idx = 0;
  double u_model_kw = 0.0;
  double u_star_kw = 0.0;
};

struct EvalAggregates {
  int n_samples = 0;
  int degenerate_count = 0;
  double opt_gap_avg = 0, opt_gap_min = 0, opt_gap_max = 0;
  double feas_gap_avg = 0, feas_gap_min = 0, feas_gap_max = 0;
  double model_time_avg = 0, model_time_min = 0, model_time_max = 0;
  double oracle_time_avg = 0, oracle_time_min = 0, oracle_time_max = 0;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  std::vector<SpectrumRow> spectra;

  /// Aggregates are always recomputed from the per-sample rows.
  EvalAggregates aggregates() const;
};

/// Runs the model and the exact solver on every sample: optimality and
/// feasibility gaps, median-of-11 timings, and per-agent solution spectra.
EvalReport evaluate(const ModelParams& params,
                    const std::vector<ProblemInstance>& test_set,
                    bool with_timing = true);

/// Line-delimited dataset records:
///   {"p_omax": ..., "agents": [{"p_cap": ..., "p_dem": ...}, ...]}
/// Field order fixed, UTF-8. A nonempty header is written as a '#' comment
/// line; the reader skips comment and blank lines.
void write_dataset(std::ostream& os,
                   const std::vector<ProblemInstance>& instances,
                   const std::string& header);
std::vector<ProblemInstance> read_dataset(std::istream& is);

void write_eval_csv(std::ostream& os, const EvalReport& report,
                    const std::string& header);
void write_spectra_csv(std::ostream& os, const EvalReport& report,
                       const std::string& header);
void write_aggregate_record(std::ostream& os, const EvalAggregates& agg,
                            const std::string& header);

}  // namespace vppnet

#endif  // VPPNET_PIPELINE_HPP
