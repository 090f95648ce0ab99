#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "vppnet/checks.hpp"
#include "vppnet/gauge.hpp"
#include "vppnet/neural.hpp"

using namespace vppnet;

TEST_CASE("input normalization") {
  const ProblemInstance inst({{25.0, 0.0}, {12.5, 12.5}}, 100.0);
  const Eigen::MatrixXd x = normalize_inputs(inst);
  CHECK(x(0, 0) == 1.0);
  CHECK(x(0, 1) == 0.0);
  CHECK(x(1, 0) == 0.5);
  CHECK(x(1, 1) == 0.5);

  const Permutation swap({1, 0});
  const Eigen::MatrixXd xp = normalize_inputs(apply_permutation(swap, inst));
  CHECK(xp.row(0) == x.row(1));
  CHECK(xp.row(1) == x.row(0));
}

TEST_CASE("initialization is seed-deterministic") {
  const HyperParams hyper{2, 8, 2, 1};
  const ModelParams a = init_params(hyper, 123);
  const ModelParams b = init_params(hyper, 123);
  const ModelParams c = init_params(hyper, 124);
  CHECK((a.to_flat() - b.to_flat()).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.to_flat() - c.to_flat()).cwiseAbs().maxCoeff() > 0.0);

  // Biases zero, weights within the Glorot limit.
  CHECK(a.b_embed1.isZero(0.0));
  CHECK(a.blocks[0].b_query.isZero(0.0));
  const double limit = std::sqrt(6.0 / (8 + 8));
  CHECK(a.blocks[0].w_query.cwiseAbs().maxCoeff() <= limit);

  Rng rng(3);
  const ProblemInstance inst = random_instance(rng, 5);
  CHECK(forward(a, inst).allFinite());
}

TEST_CASE("flat round-trip preserves parameters") {
  const HyperParams hyper{2, 6, 1, 1};
  const ModelParams p = init_params(hyper, 7);
  const ModelParams q = ModelParams::from_flat(hyper, p.to_flat());
  CHECK((p.to_flat() - q.to_flat()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(p.n_params() == static_cast<std::size_t>(p.to_flat().size()));
}

TEST_CASE("N=1 forward reduces to a per-agent chain") {
  const HyperParams hyper{2, 8, 1, 1};
  const ModelParams p = init_params(hyper, 99);
  const ProblemInstance inst({{18.0, 6.0}}, 100.0);
  const DecisionVector v = forward(p, inst);

  // Attention over a single agent is the identity mix: softmax of a
  // singleton is 1 and the mixed value is the agent's own value projection.
  const Eigen::RowVectorXd x = normalize_inputs(inst).row(0);
  const Eigen::RowVectorXd e1 =
      ((x * p.w_embed1) + p.b_embed1.transpose()).array().tanh();
  const Eigen::RowVectorXd h =
      ((e1 * p.w_embed2) + p.b_embed2.transpose()).array().tanh();
  const auto& blk = p.blocks[0];
  const Eigen::RowVectorXd val = (h * blk.w_value) + blk.b_value.transpose();
  const Eigen::RowVectorXd post =
      h + (val * blk.w_out) + blk.b_out.transpose();
  const Eigen::RowVectorXd f1 =
      ((post * blk.w_ffn1) + blk.b_ffn1.transpose()).array().tanh();
  const Eigen::RowVectorXd out =
      post + (f1 * blk.w_ffn2) + blk.b_ffn2.transpose();
  const double expected =
      kFeatureScaleKw * ((out * p.w_head)(0, 0) + p.b_head(0));
  CHECK(v(0) == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("forward is permutation-equivariant within 1e-6") {
  Rng rng(41);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = rng.uniform_int(1, 20);
    const ProblemInstance inst = random_instance(rng, n);
    const ModelParams p = init_params({2, 16, 1, 1}, rng.next_u64());
    const Permutation sigma = Permutation::random(n, rng);
    const DecisionVector lhs = apply_permutation(sigma, forward(p, inst));
    const DecisionVector rhs = forward(p, apply_permutation(sigma, inst));
    worst = std::max(worst, (lhs - rhs).cwiseAbs().maxCoeff());
  }
  CHECK(worst <= 1e-6);
}

TEST_CASE("duplicate agents get identical predictions") {
  Rng rng(42);
  const ModelParams p = init_params({2, 16, 1, 1}, 5);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<AgentInput> agents;
    const AgentInput dup{rng.uniform(10.0, 25.0), rng.uniform(10.0, 25.0)};
    agents.push_back(dup);
    agents.push_back({rng.uniform(10.0, 25.0), rng.uniform(10.0, 25.0)});
    agents.push_back(dup);
    const ProblemInstance inst(std::move(agents), 100.0);
    const DecisionVector v = forward(p, inst);
    CHECK(std::abs(v(0) - v(2)) <= 1e-12);
  }
}

TEST_CASE("one parameter set serves any agent count") {
  const ModelParams p = init_params({2, 8, 1, 1}, 17);
  Rng rng(43);
  for (int n = 1; n <= 50; ++n) {
    const ProblemInstance inst = random_instance(rng, n);
    const DecisionVector v = forward(p, inst);
    REQUIRE(v.size() == n);
    CHECK(v.allFinite());
  }
}

TEST_CASE("forward is deterministic") {
  const ModelParams p = init_params({2, 32, 2, 1}, 2);
  Rng rng(44);
  const ProblemInstance inst = random_instance(rng, 9);
  const DecisionVector a = forward(p, inst);
  const DecisionVector b = forward(p, inst);
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("non-finite intermediates are reported with the block") {
  ModelParams p = init_params({2, 8, 1, 1}, 3);
  p.blocks[0].w_ffn2(0, 0) = std::numeric_limits<double>::quiet_NaN();
  Rng rng(45);
  const ProblemInstance inst = random_instance(rng, 4);
  CHECK_THROWS_WITH_AS(forward(p, inst),
                       "forward: non-finite activations in attention block 0",
                       NumericError);
}

TEST_CASE("zero upstream gradient yields zero parameter gradients") {
  const ModelParams p = init_params({2, 8, 1, 1}, 21);
  Rng rng(46);
  const ProblemInstance inst = random_instance(rng, 4);
  ForwardCache cache;
  (void)forward(p, inst, &cache);
  const ModelParams g = backward(p, cache, DecisionVector::Zero(4));
  CHECK(g.to_flat().isZero(0.0));
}

TEST_CASE("backward requires a matching cache") {
  const ModelParams p = init_params({2, 8, 1, 1}, 21);
  Rng rng(47);
  const ProblemInstance inst = random_instance(rng, 4);
  ForwardCache cache;
  CHECK_THROWS_AS(backward(p, cache, DecisionVector::Zero(4)),
                  std::logic_error);
  (void)forward(p, inst, &cache);
  const ModelParams other = init_params({2, 16, 1, 1}, 21);
  CHECK_THROWS_AS(backward(other, cache, DecisionVector::Zero(4)),
                  std::logic_error);
  CHECK_THROWS_AS(backward(p, cache, DecisionVector::Zero(9)),
                  DimensionError);
}

TEST_CASE("network gradients match central finite differences") {
  const HyperParams hyper{2, 8, 1, 1};
  const ModelParams p = init_params(hyper, 31);
  Rng rng(48);
  const ProblemInstance inst = random_instance(rng, 3);
  DecisionVector w(3);
  for (int i = 0; i < 3; ++i) w(i) = rng.uniform(-1.0, 1.0);

  ForwardCache cache;
  (void)forward(p, inst, &cache);
  const Eigen::VectorXd analytic = backward(p, cache, w).to_flat();

  const Eigen::VectorXd flat = p.to_flat();
  const double h = 1e-4;
  for (int k = 0; k < 20; ++k) {
    const int idx = rng.uniform_int(0, static_cast<int>(flat.size()) - 1);
    Eigen::VectorXd probe = flat;
    probe(idx) = flat(idx) + h;
    const double up = w.dot(forward(ModelParams::from_flat(hyper, probe), inst));
    probe(idx) = flat(idx) - h;
    const double down =
        w.dot(forward(ModelParams::from_flat(hyper, probe), inst));
    const double fd = (up - down) / (2.0 * h);
    const double denom = std::max({std::abs(analytic(idx)), std::abs(fd), 1e-6});
    CHECK(std::abs(analytic(idx) - fd) / denom <= 1e-4);
  }
}

TEST_CASE("gradient through the gauge map is affine in the pass-through region") {
  const HyperParams hyper{2, 8, 1, 1};
  Rng rng(49);
  // Scale the head down so the prediction stays strictly inside.
  ModelParams p = init_params(hyper, 52);
  p.w_head *= 1e-3;
  const ProblemInstance inst = random_instance(rng, 3);
  const DecisionVector u0 = compute_interior_point(inst);
  const GaugeData gd = build_gauge_data(inst, u0);
  ForwardCache cache;
  const DecisionVector v = forward(p, inst, &cache);
  REQUIRE(gauge_psi(gd, v) < 1.0);

  DecisionVector w(3);
  for (int i = 0; i < 3; ++i) w(i) = rng.uniform(-1.0, 1.0);
  // d(w . gauge_map(v))/dparams == d(w . (u0 + v))/dparams == d(w . v)/dparams.
  const DecisionVector dv = gauge_map_backward(gd, v, w);
  CHECK((dv - w).cwiseAbs().maxCoeff() == 0.0);
  const Eigen::VectorXd through_gauge = backward(p, cache, dv).to_flat();
  const Eigen::VectorXd direct = backward(p, cache, w).to_flat();
  CHECK((through_gauge - direct).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("checkpoint round-trip is bitwise") {
  const HyperParams hyper{2, 12, 2, 1};
  const ModelParams p = init_params(hyper, 77);
  const std::string path =
      (std::filesystem::temp_directory_path() / "vppnet_test.ckpt").string();
  save_checkpoint(path, p, "unit-test metadata");
  const auto [loaded, meta] = load_checkpoint(path);
  CHECK(meta == "unit-test metadata");
  CHECK(loaded.hyper == hyper);
  CHECK((loaded.to_flat() - p.to_flat()).cwiseAbs().maxCoeff() == 0.0);
  std::filesystem::remove(path);
}

TEST_CASE("checkpoint rejects foreign or truncated files") {
  const auto dir = std::filesystem::temp_directory_path();
  const std::string bad = (dir / "vppnet_bad.ckpt").string();
  {
    std::FILE* f = std::fopen(bad.c_str(), "wb");
    REQUIRE(f != nullptr);
    std::fputs("not a checkpoint", f);
    std::fclose(f);
  }
  CHECK_THROWS(load_checkpoint(bad));
  CHECK_THROWS(load_checkpoint((dir / "vppnet_missing.ckpt").string()));
  std::filesystem::remove(bad);
}
