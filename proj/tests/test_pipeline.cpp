#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "vppnet/checks.hpp"
#include "vppnet/config.hpp"
#include "vppnet/gauge.hpp"
#include "vppnet/oracle.hpp"
#include "vppnet/pipeline.hpp"

using namespace vppnet;

namespace {

DataGenConfig small_cfg(std::uint64_t seed) {
  DataGenConfig cfg;
  cfg.n_samples = 30;
  cfg.n_test = 10;
  cfg.seed = seed;
  return cfg;
}

std::string dump(const std::vector<ProblemInstance>& data) {
  std::ostringstream os;
  write_dataset(os, data, "header");
  return os.str();
}

}  // namespace

TEST_CASE("config validation names the offending field") {
  DataGenConfig cfg;
  cfg.subset_min = 25;
  try {
    cfg.validate();
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.field() == "subset_min");
  }
  TrainConfig tc;
  tc.learning_rate = -1.0;
  CHECK_THROWS_AS(tc.validate(), ConfigError);
}

TEST_CASE("generation is deterministic and respects bounds") {
  const GenerationResult a = generate_dataset(small_cfg(5));
  const GenerationResult b = generate_dataset(small_cfg(5));
  CHECK(dump(a.instances) == dump(b.instances));
  CHECK(a.instances.size() == 30);

  for (const auto& inst : a.instances) {
    CHECK(inst.n_agents() >= 5);
    CHECK(inst.n_agents() <= 20);
    CHECK(inst.is_feasible());
    CHECK(has_interior(inst));
    for (const auto& agent : inst.agents()) {
      CHECK(agent.p_cap >= 10.0 * 0.9);
      CHECK(agent.p_cap <= 25.0 * 1.1);
    }
  }
  const GenerationResult c = generate_dataset(small_cfg(6));
  CHECK(dump(a.instances) != dump(c.instances));
}

TEST_CASE("zero fluctuation and full subset collapse to one sample") {
  DataGenConfig cfg = small_cfg(9);
  cfg.fluctuation = 0.0;
  cfg.subset_min = cfg.n_agents_max;
  const GenerationResult gen = generate_dataset(cfg);
  const auto& first = gen.instances.front();
  for (const auto& inst : gen.instances) {
    REQUIRE(inst.n_agents() == first.n_agents());
    for (int i = 0; i < inst.n_agents(); ++i) {
      CHECK(inst.agent(i).p_cap == first.agent(i).p_cap);
      CHECK(inst.agent(i).p_dem == first.agent(i).p_dem);
    }
  }
}

TEST_CASE("dataset file round-trip preserves every value") {
  const GenerationResult gen = generate_dataset(small_cfg(11));
  std::stringstream ss;
  write_dataset(ss, gen.instances, "vppnet test");
  const std::vector<ProblemInstance> back = read_dataset(ss);
  REQUIRE(back.size() == gen.instances.size());
  for (std::size_t s = 0; s < back.size(); ++s) {
    CHECK(back[s].p_omax() == gen.instances[s].p_omax());
    REQUIRE(back[s].n_agents() == gen.instances[s].n_agents());
    for (int i = 0; i < back[s].n_agents(); ++i) {
      CHECK(back[s].agent(i).p_cap == gen.instances[s].agent(i).p_cap);
      CHECK(back[s].agent(i).p_dem == gen.instances[s].agent(i).p_dem);
    }
  }
}

TEST_CASE("dataset reader rejects unknown fields") {
  std::istringstream bad(
      R"({"p_omax":100.0,"agents":[{"p_cap":10.0,"p_dem":1.0}],"extra":1})");
  CHECK_THROWS(read_dataset(bad));
  std::istringstream bad_agent(
      R"({"p_omax":100.0,"agents":[{"p_cap":10.0,"watts":1.0}]})");
  CHECK_THROWS(read_dataset(bad_agent));
  std::istringstream not_json("p_omax=100");
  CHECK_THROWS(read_dataset(not_json));
}

TEST_CASE("batches group by agent count and partition the order") {
  const GenerationResult gen = generate_dataset(small_cfg(13));
  std::vector<int> order(gen.instances.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  const auto batches = group_by_agent_count(gen.instances, order, 4);
  std::vector<bool> seen(gen.instances.size(), false);
  for (const auto& b : batches) {
    CHECK(b.sample_ids.size() <= 4);
    for (int id : b.sample_ids) {
      CHECK(gen.instances[static_cast<std::size_t>(id)].n_agents() ==
            b.n_agents);
      CHECK_FALSE(seen[static_cast<std::size_t>(id)]);
      seen[static_cast<std::size_t>(id)] = true;
    }
  }
  for (bool s : seen) CHECK(s);
}

TEST_CASE("zero learning rate leaves parameters untouched") {
  const GenerationResult gen = generate_dataset(small_cfg(15));
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.learning_rate = 0.0;
  cfg.seed = 2;
  const ModelParams init = init_params({2, 8, 1, 1}, 4);
  const TrainResult result = train(init, gen.instances, cfg);
  CHECK((result.params.to_flat() - init.to_flat()).cwiseAbs().maxCoeff() ==
        0.0);
  REQUIRE(result.epoch_loss.size() == 3);
  CHECK(result.epoch_loss[0] == result.epoch_loss[1]);
  CHECK(result.epoch_loss[1] == result.epoch_loss[2]);
}

TEST_CASE("objective training reduces the loss") {
  const GenerationResult gen = generate_dataset(small_cfg(17));
  TrainConfig cfg;
  cfg.epochs = 10;
  cfg.seed = 3;
  const TrainResult result =
      train(init_params({2, 8, 1, 1}, 5), gen.instances, cfg);
  CHECK(result.epoch_loss.back() <= result.epoch_loss.front());
  for (double l : result.epoch_loss) CHECK(std::isfinite(l));
}

TEST_CASE("supervised training reduces the relative error") {
  const GenerationResult gen = generate_dataset(small_cfg(19));
  TrainConfig cfg;
  cfg.loss_mode = LossMode::kSupervised;
  cfg.epochs = 10;
  cfg.seed = 4;
  const TrainResult result =
      train(init_params({2, 8, 1, 1}, 6), gen.instances, cfg);
  CHECK(result.epoch_loss.back() <= result.epoch_loss.front());
}

TEST_CASE("training aborts on poisoned parameters") {
  const GenerationResult gen = generate_dataset(small_cfg(21));
  ModelParams bad = init_params({2, 8, 1, 1}, 7);
  bad.w_embed1(0, 0) = std::numeric_limits<double>::quiet_NaN();
  TrainConfig cfg;
  cfg.epochs = 1;
  CHECK_THROWS_AS(train(bad, gen.instances, cfg), NumericError);
}

TEST_CASE("all-zero weights predict the interior point") {
  const GenerationResult gen = generate_dataset(small_cfg(23));
  const ModelParams zeros = ModelParams::zeros({2, 8, 1, 1});
  const std::vector<ProblemInstance> subset(gen.instances.begin(),
                                            gen.instances.begin() + 5);
  const EvalReport report = evaluate(zeros, subset, /*with_timing=*/false);
  REQUIRE(report.rows.size() == 5);
  for (const auto& row : report.rows) {
    CHECK(row.feas_gap_kw <= 1e-6);
    CHECK(std::isfinite(row.opt_gap));
  }
  for (std::size_t s = 0; s < subset.size(); ++s) {
    const DecisionVector u0 = compute_interior_point(subset[s]);
    const DecisionVector u = predict(zeros, subset[s]);
    CHECK((u - u0).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("evaluation is deterministic apart from timings") {
  const GenerationResult gen = generate_dataset(small_cfg(25));
  const ModelParams params = init_params({2, 8, 1, 1}, 8);
  const std::vector<ProblemInstance> subset(gen.instances.begin(),
                                            gen.instances.begin() + 5);
  const EvalReport a = evaluate(params, subset, false);
  const EvalReport b = evaluate(params, subset, false);
  REQUIRE(a.rows.size() == b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    CHECK(a.rows[i].opt_gap == b.rows[i].opt_gap);
    CHECK(a.rows[i].feas_gap_kw == b.rows[i].feas_gap_kw);
  }
}

TEST_CASE("end-to-end equivariance of the evaluation pipeline") {
  Rng rng(61);
  const ModelParams params = init_params({2, 16, 1, 1}, 9);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = rng.uniform_int(2, 20);
    const ProblemInstance inst = random_instance(rng, n);
    const Permutation sigma = Permutation::random(n, rng);
    const ProblemInstance pinst = apply_permutation(sigma, inst);

    const DecisionVector u = predict(params, inst);
    const DecisionVector up = predict(params, pinst);
    CHECK((apply_permutation(sigma, u) - up).cwiseAbs().maxCoeff() <= 1e-6);

    const DecisionVector star = solve_exact(inst);
    const DecisionVector star_p = solve_exact(pinst);
    CHECK(std::abs(optimality_gap(u, star) - optimality_gap(up, star_p)) <=
          1e-6);
    CHECK(std::abs(feasibility_gap(inst, u) - feasibility_gap(pinst, up)) <=
          1e-6);
  }
}

TEST_CASE("aggregates equal recomputation from rows") {
  EvalReport report;
  report.rows = {{0, 5, 0.1, 0.0, 10.0, 1.0, false},
                 {1, 7, 0.3, 2e-7, 30.0, 3.0, false},
                 {2, 9, 0.2, 1e-7, 20.0, 2.0, false}};
  const EvalAggregates agg = report.aggregates();
  CHECK(agg.n_samples == 3);
  CHECK(agg.opt_gap_avg == doctest::Approx(0.2));
  CHECK(agg.opt_gap_min == 0.1);
  CHECK(agg.opt_gap_max == 0.3);
  CHECK(agg.feas_gap_max == 2e-7);
  CHECK(agg.model_time_avg == doctest::Approx(20.0));
  CHECK(agg.oracle_time_avg == doctest::Approx(2.0));

  std::ostringstream os;
  write_aggregate_record(os, agg, "hdr");
  CHECK(os.str().find("opt_gap_avg=0.2") != std::string::npos);
  CHECK(os.str().find("# hdr") != std::string::npos);
}

TEST_CASE("report csv carries the fixed schema") {
  EvalReport report;
  report.rows = {{0, 5, 0.25, 0.0, 10.0, 1.0, false}};
  report.spectra = {{0, 0, 12.5, 13.0}};
  std::ostringstream os;
  write_eval_csv(os, report, "hdr");
  CHECK(os.str().find(
            "sample_id,n_agents,opt_gap,feas_gap_kw,model_time_us,"
            "oracle_time_us") != std::string::npos);
  CHECK(os.str().find("0,5,0.25,0,10,1") != std::string::npos);
  std::ostringstream ss;
  write_spectra_csv(ss, report, "");
  CHECK(ss.str().find("sample_id,agent_idx,u_model_kw,u_star_kw") !=
        std::string::npos);
  CHECK(ss.str().find("0,0,12.5,13") != std::string::npos);
}

TEST_CASE("key=value configs parse with defaults and strict keys") {
  std::istringstream good(
      "# comment\nn_samples=50\nn_test=10\nseed=9\nfluctuation=0.05\n");
  const DataGenConfig cfg = parse_datagen_config(good);
  CHECK(cfg.n_samples == 50);
  CHECK(cfg.n_test == 10);
  CHECK(cfg.seed == 9);
  CHECK(cfg.fluctuation == doctest::Approx(0.05));
  CHECK(cfg.n_agents_max == 20);  // default

  std::istringstream unknown("n_samples=50\nn_test=10\nmystery=1\n");
  try {
    (void)parse_datagen_config(unknown);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.field() == "mystery");
  }

  std::istringstream bad_value("epochs=ten\n");
  CHECK_THROWS_AS((void)parse_train_config(bad_value), ConfigError);

  std::istringstream train_file(
      "loss_mode=supervised\nepochs=12\nd_hidden=16\nholdout=5\n");
  const TrainRunConfig trc = parse_train_config(train_file);
  CHECK(trc.train.loss_mode == LossMode::kSupervised);
  CHECK(trc.train.epochs == 12);
  CHECK(trc.hyper.d_h == 16);
  CHECK(trc.holdout == 5);
}
