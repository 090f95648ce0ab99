#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

const std::string kCli = VPPNET_CLI_PATH;

struct RunResult {
  int exit_code = -1;
  std::string output;  // stdout + stderr
};

RunResult run(const std::string& args) {
  static int counter = 0;
  const fs::path log =
      fs::temp_directory_path() / ("vppnet_cli_out_" +
                                   std::to_string(counter++) + ".log");
  const std::string cmd =
      kCli + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream is(log);
  std::stringstream ss;
  ss << is.rdbuf();
  r.output = ss.str();
  fs::remove(log);
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("vppnet_cli_test_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

void write_file(const fs::path& p, const std::string& content) {
  std::ofstream os(p);
  os << content;
}

const std::string kSmallDatagen =
    "n_agents_max=8\nsubset_min=3\nn_samples=24\nn_test=6\nseed=12\n";
const std::string kSmallTrain =
    "epochs=2\nbatch_size=8\nd_hidden=8\nholdout=6\nseed=3\n";

}  // namespace

TEST_CASE("generate writes a reproducible dataset") {
  TempDir tmp;
  write_file(tmp.path / "gen.cfg", kSmallDatagen);
  const std::string base = "generate --config " +
                           (tmp.path / "gen.cfg").string() + " --out ";
  const RunResult a = run(base + (tmp.path / "a.jsonl").string());
  REQUIRE(a.exit_code == 0);
  CHECK(a.output.find("samples=24") != std::string::npos);
  CHECK(a.output.find("seed=12") != std::string::npos);

  const RunResult b = run(base + (tmp.path / "b.jsonl").string());
  REQUIRE(b.exit_code == 0);
  CHECK(slurp(tmp.path / "a.jsonl") == slurp(tmp.path / "b.jsonl"));

  // 1 header comment + 24 records.
  std::ifstream is(tmp.path / "a.jsonl");
  int lines = 0;
  std::string line;
  while (std::getline(is, line)) ++lines;
  CHECK(lines == 25);

  // --seed overrides the config seed.
  const RunResult c = run(base + (tmp.path / "c.jsonl").string() + " --seed 99");
  REQUIRE(c.exit_code == 0);
  CHECK(c.output.find("seed=99") != std::string::npos);
  CHECK(slurp(tmp.path / "a.jsonl") != slurp(tmp.path / "c.jsonl"));
}

TEST_CASE("generate with an all-defaults config yields 400 records") {
  TempDir tmp;
  write_file(tmp.path / "default.cfg", "# all defaults\n");
  const RunResult r = run("generate --config " +
                          (tmp.path / "default.cfg").string() + " --out " +
                          (tmp.path / "d.jsonl").string());
  REQUIRE(r.exit_code == 0);
  CHECK(r.output.find("samples=400") != std::string::npos);
  std::ifstream is(tmp.path / "d.jsonl");
  int records = 0;
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && line[0] != '#') ++records;
  }
  CHECK(records == 400);
}

TEST_CASE("generate rejects invalid configs by field name") {
  TempDir tmp;
  write_file(tmp.path / "bad.cfg", "subset_min=25\n");
  const RunResult r = run("generate --config " +
                          (tmp.path / "bad.cfg").string() + " --out " +
                          (tmp.path / "x.jsonl").string());
  CHECK(r.exit_code == 1);
  CHECK(r.output.find("subset_min") != std::string::npos);

  write_file(tmp.path / "unknown.cfg", "voltage=11\n");
  const RunResult u = run("generate --config " +
                          (tmp.path / "unknown.cfg").string() + " --out " +
                          (tmp.path / "x.jsonl").string());
  CHECK(u.exit_code == 1);
  CHECK(u.output.find("voltage") != std::string::npos);
}

TEST_CASE("train, eval and bench round-trip") {
  TempDir tmp;
  write_file(tmp.path / "gen.cfg", kSmallDatagen);
  REQUIRE(run("generate --config " + (tmp.path / "gen.cfg").string() +
              " --out " + (tmp.path / "data.jsonl").string())
              .exit_code == 0);

  write_file(tmp.path / "train.cfg", kSmallTrain);
  const RunResult t = run("train --data " + (tmp.path / "data.jsonl").string() +
                          " --config " + (tmp.path / "train.cfg").string() +
                          " --out " + (tmp.path / "m.ckpt").string());
  REQUIRE(t.exit_code == 0);
  CHECK(fs::exists(tmp.path / "m.ckpt"));
  CHECK(fs::exists(tmp.path / "m.ckpt.history.csv"));

  const RunResult e = run("eval --data " + (tmp.path / "data.jsonl").string() +
                          " --ckpt " + (tmp.path / "m.ckpt").string() +
                          " --out-dir " + (tmp.path / "report").string() +
                          " --holdout 6");
  REQUIRE(e.exit_code == 0);
  CHECK(e.output.find("optimality gap") != std::string::npos);
  CHECK(e.output.find("feasibility gap") != std::string::npos);
  CHECK(fs::exists(tmp.path / "report" / "report.csv"));
  CHECK(fs::exists(tmp.path / "report" / "report_aggregate.txt"));
  CHECK(fs::exists(tmp.path / "report" / "spectra.csv"));
  CHECK(slurp(tmp.path / "report" / "report.csv").rfind("# vppnet", 0) == 0);

  // Untrained-or-not, structural feasibility keeps the gap column at zero.
  const std::string agg = slurp(tmp.path / "report" / "report_aggregate.txt");
  CHECK(agg.find("feas_gap_kw_max=") != std::string::npos);

  const RunResult b = run("bench --data " + (tmp.path / "data.jsonl").string() +
                          " --ckpt " + (tmp.path / "m.ckpt").string());
  REQUIRE(b.exit_code == 0);
  CHECK(b.output.find("inference op count fixed for fixed N: yes") !=
        std::string::npos);
}

TEST_CASE("zero learning rate trains to a flat loss history") {
  TempDir tmp;
  write_file(tmp.path / "gen.cfg", kSmallDatagen);
  REQUIRE(run("generate --config " + (tmp.path / "gen.cfg").string() +
              " --out " + (tmp.path / "data.jsonl").string())
              .exit_code == 0);
  write_file(tmp.path / "train.cfg",
             "epochs=3\nlearning_rate=0\nd_hidden=8\nholdout=6\n");
  REQUIRE(run("train --data " + (tmp.path / "data.jsonl").string() +
              " --config " + (tmp.path / "train.cfg").string() + " --out " +
              (tmp.path / "m.ckpt").string())
              .exit_code == 0);
  std::ifstream is(tmp.path / "m.ckpt.history.csv");
  std::string line, first_loss;
  int rows = 0;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#' || line.rfind("epoch", 0) == 0) continue;
    const std::string loss = line.substr(line.find(',') + 1);
    if (rows == 0) first_loss = loss;
    CHECK(loss == first_loss);
    ++rows;
  }
  CHECK(rows == 3);
}

TEST_CASE("eval reports a missing checkpoint by path") {
  TempDir tmp;
  write_file(tmp.path / "gen.cfg", kSmallDatagen);
  REQUIRE(run("generate --config " + (tmp.path / "gen.cfg").string() +
              " --out " + (tmp.path / "data.jsonl").string())
              .exit_code == 0);
  const std::string missing = (tmp.path / "nope.ckpt").string();
  const RunResult r = run("eval --data " + (tmp.path / "data.jsonl").string() +
                          " --ckpt " + missing + " --out-dir " +
                          (tmp.path / "report").string());
  CHECK(r.exit_code != 0);
  CHECK(r.output.find(missing) != std::string::npos);
}

TEST_CASE("check passes clean and fails under injected faults") {
  const RunResult clean = run("check --seed 5");
  CHECK(clean.exit_code == 0);
  CHECK(clean.output.find("[PASS] equivariance") != std::string::npos);
  CHECK(clean.output.find("[PASS] gauge-laws") != std::string::npos);

  const RunResult pos = run("check --seed 5 --inject-fault positional-encoding");
  CHECK(pos.exit_code != 0);
  CHECK(pos.output.find("[FAIL] equivariance") != std::string::npos);

  const RunResult clamp = run("check --seed 5 --inject-fault no-gauge-clamp");
  CHECK(clamp.exit_code != 0);
  CHECK(clamp.output.find("[FAIL] gauge-laws") != std::string::npos);
}
