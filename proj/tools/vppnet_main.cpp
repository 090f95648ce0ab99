// Command-line front end: dataset generation, training, evaluation,
// benchmarking, and the property self-check.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "vppnet/checks.hpp"
#include "vppnet/config.hpp"
#include "vppnet/gauge.hpp"
#include "vppnet/oracle.hpp"
#include "vppnet/pipeline.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

struct SeedOverride {
  bool set = false;
  std::uint64_t value = 0;
};

std::vector<vppnet::ProblemInstance> load_dataset(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read dataset: " + path);
  return vppnet::read_dataset(is);
}

int cmd_generate(const std::string& config_path, const std::string& out_path,
                 const SeedOverride& seed) {
  vppnet::DataGenConfig cfg = vppnet::parse_datagen_config_file(config_path);
  if (seed.set) cfg.seed = seed.value;
  const vppnet::GenerationResult gen = vppnet::generate_dataset(cfg);
  std::ofstream os(out_path);
  if (!os) throw std::runtime_error("cannot write dataset: " + out_path);
  const std::string digest = vppnet::config_digest_file(config_path);
  vppnet::write_dataset(os, gen.instances, vppnet::file_header(cfg.seed, digest));
  if (!os) throw std::runtime_error("write failed: " + out_path);
  std::cout << "samples=" << gen.instances.size()
            << " rejections=" << gen.rejections << " seed=" << cfg.seed
            << "\n";
  return kExitOk;
}

int cmd_train(const std::string& data_path, const std::string& config_path,
              const std::string& out_path, const SeedOverride& seed) {
  vppnet::TrainRunConfig cfg = vppnet::parse_train_config_file(config_path);
  if (seed.set) cfg.train.seed = seed.value;
  const auto dataset = load_dataset(data_path);
  if (static_cast<int>(dataset.size()) <= cfg.holdout) {
    throw vppnet::ConfigError("holdout",
                              "holdout leaves no training samples");
  }
  const std::vector<vppnet::ProblemInstance> train_split(
      dataset.begin(), dataset.end() - cfg.holdout);

  vppnet::ModelParams params = vppnet::init_params(cfg.hyper, cfg.train.seed);
  const vppnet::TrainResult result =
      vppnet::train(std::move(params), train_split, cfg.train);

  const std::string digest = vppnet::config_digest_file(config_path);
  const std::string header = vppnet::file_header(cfg.train.seed, digest);
  vppnet::save_checkpoint(out_path, result.params, header);

  const std::string history_path = out_path + ".history.csv";
  std::ofstream hs(history_path);
  if (!hs) throw std::runtime_error("cannot write " + history_path);
  hs << "# " << header << "\n";
  hs << "epoch,train_loss\n";
  char buf[32];
  for (std::size_t e = 0; e < result.epoch_loss.size(); ++e) {
    std::snprintf(buf, sizeof(buf), "%.10g", result.epoch_loss[e]);
    hs << e << ',' << buf << "\n";
  }
  std::cout << "checkpoint=" << out_path << " history=" << history_path
            << " final_loss=" << result.epoch_loss.back() << "\n";
  return kExitOk;
}

void print_summaries(const vppnet::EvalAggregates& agg) {
  std::printf("optimality gap:  avg %.2f  min %.2f  max %.2f\n",
              agg.opt_gap_avg, agg.opt_gap_min, agg.opt_gap_max);
  std::printf("feasibility gap: avg %.2f  min %.2f  max %.2f (kW)\n",
              agg.feas_gap_avg, agg.feas_gap_min, agg.feas_gap_max);
  std::printf("timing (ms):     model avg %.3f min %.3f max %.3f\n",
              agg.model_time_avg / 1000.0, agg.model_time_min / 1000.0,
              agg.model_time_max / 1000.0);
  std::printf("                 solver avg %.3f min %.3f max %.3f\n",
              agg.oracle_time_avg / 1000.0, agg.oracle_time_min / 1000.0,
              agg.oracle_time_max / 1000.0);
}

int cmd_eval(const std::string& data_path, const std::string& ckpt_path,
             const std::string& out_dir, const std::string& split,
             int holdout) {
  const auto [params, meta] = vppnet::load_checkpoint(ckpt_path);
  if (params.hyper.d_in != 2) {
    throw vppnet::DimensionError(
        "checkpoint expects " + std::to_string(params.hyper.d_in) +
        " input features; dataset provides 2");
  }
  auto dataset = load_dataset(data_path);
  std::vector<vppnet::ProblemInstance> eval_set;
  if (split == "test") {
    if (static_cast<int>(dataset.size()) < holdout) {
      throw vppnet::ConfigError("holdout", "dataset smaller than holdout");
    }
    eval_set.assign(dataset.end() - holdout, dataset.end());
  } else {
    eval_set = std::move(dataset);
  }

  const vppnet::EvalReport report = vppnet::evaluate(params, eval_set);
  const vppnet::EvalAggregates agg = report.aggregates();

  std::filesystem::create_directories(out_dir);
  std::string header =
      "vppnet " + std::string(vppnet::kVersion) + " ckpt=" + ckpt_path;
  if (!meta.empty()) header += " [" + meta + "]";
  {
    std::ofstream os(out_dir + "/report.csv");
    vppnet::write_eval_csv(os, report, header);
  }
  {
    std::ofstream os(out_dir + "/report_aggregate.txt");
    vppnet::write_aggregate_record(os, agg, header);
  }
  {
    std::ofstream os(out_dir + "/spectra.csv");
    vppnet::write_spectra_csv(os, report, header);
  }
  std::cout << "evaluated " << report.rows.size() << " samples -> " << out_dir
            << "\n";
  print_summaries(agg);
  return kExitOk;
}

int cmd_bench(const std::string& data_path, const std::string& ckpt_path) {
  const auto [params, meta] = vppnet::load_checkpoint(ckpt_path);
  const auto dataset = load_dataset(data_path);
  if (dataset.empty()) throw std::runtime_error("bench: empty dataset");

  const vppnet::EvalReport report = vppnet::evaluate(params, dataset);
  print_summaries(report.aggregates());

  // Structural property: inference op count depends on N only.
  bool fixed = true;
  for (int n : {1, 5, 12}) {
    std::uint64_t reference = 0;
    vppnet::Rng rng(7);
    for (int trial = 0; trial < 5; ++trial) {
      const vppnet::ProblemInstance inst = vppnet::random_instance(rng, n);
      std::uint64_t ops = 0;
      {
        vppnet::opcount::Scope scope(&ops);
        (void)vppnet::predict(params, inst);
      }
      if (trial == 0) {
        reference = ops;
      } else if (ops != reference) {
        fixed = false;
      }
    }
  }
  std::cout << "inference op count fixed for fixed N: "
            << (fixed ? "yes" : "NO") << "\n";
  return fixed ? kExitOk : kExitRuntime;
}

int cmd_check(std::uint64_t seed, const std::string& fault_name) {
  vppnet::FaultInjection fault = vppnet::FaultInjection::kNone;
  if (fault_name == "positional-encoding") {
    fault = vppnet::FaultInjection::kPositionalEncoding;
  } else if (fault_name == "no-gauge-clamp") {
    fault = vppnet::FaultInjection::kNoGaugeClamp;
  } else if (!fault_name.empty()) {
    throw vppnet::ConfigError("inject-fault",
                              "unknown fault '" + fault_name + "'");
  }
  const auto results = vppnet::run_property_checks(seed, fault);
  for (const auto& r : results) {
    std::printf("[%s] %-28s %s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(),
                r.detail.c_str());
  }
  return vppnet::all_passed(results) ? kExitOk : kExitRuntime;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Permutation-equivariant neural dispatch with guaranteed "
               "feasibility"};
  app.require_subcommand(1);

  std::string config_path, data_path, out_path, ckpt_path, out_dir;
  std::string split = "test";
  std::string fault_name;
  int holdout = 100;
  std::uint64_t check_seed = 1;
  SeedOverride seed;
  const auto add_seed = [&](CLI::App* cmd) {
    cmd->add_option_function<std::uint64_t>(
        "--seed",
        [&](const std::uint64_t& s) {
          seed.set = true;
          seed.value = s;
        },
        "override the config seed");
  };

  auto* generate = app.add_subcommand("generate", "generate a dataset file");
  generate->add_option("--config", config_path, "datagen config (key=value)")
      ->required();
  generate->add_option("--out", out_path, "output dataset path")->required();
  add_seed(generate);

  auto* train = app.add_subcommand("train", "train a model");
  train->add_option("--data", data_path, "dataset path")->required();
  train->add_option("--config", config_path, "train config (key=value)")
      ->required();
  train->add_option("--out", out_path, "checkpoint output path")->required();
  add_seed(train);

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  eval->add_option("--data", data_path, "dataset path")->required();
  eval->add_option("--ckpt", ckpt_path, "checkpoint path")->required();
  eval->add_option("--out-dir", out_dir, "report output directory")
      ->required();
  eval->add_option("--split", split, "evaluate 'test' (trailing holdout) or 'all'")
      ->check(CLI::IsMember({"test", "all"}));
  eval->add_option("--holdout", holdout, "test split size (default 100)");

  auto* bench = app.add_subcommand("bench", "timing comparison");
  bench->add_option("--data", data_path, "dataset path")->required();
  bench->add_option("--ckpt", ckpt_path, "checkpoint path")->required();

  auto* check = app.add_subcommand("check", "run property self-checks");
  check->add_option("--seed", check_seed, "check suite seed");
  check->add_option("--inject-fault", fault_name,
                    "negative control: 'positional-encoding' or "
                    "'no-gauge-clamp'");

  CLI11_PARSE(app, argc, argv);

  try {
    if (generate->parsed()) return cmd_generate(config_path, out_path, seed);
    if (train->parsed()) return cmd_train(data_path, config_path, out_path, seed);
    if (eval->parsed()) {
      return cmd_eval(data_path, ckpt_path, out_dir, split, holdout);
    }
    if (bench->parsed()) return cmd_bench(data_path, ckpt_path);
    if (check->parsed()) return cmd_check(check_seed, fault_name);
  } catch (const vppnet::ConfigError& e) {
    std::cerr << "error (" << e.field() << "): " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}
