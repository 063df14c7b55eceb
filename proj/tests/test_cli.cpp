// End-to-end checks of the CLI binary (path given via SELCORR_CLI_BIN).

#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "selcorr/dgp.hpp"
#include "selcorr/serialize.hpp"

using namespace selcorr;

namespace {

const char* cli_path() { return std::getenv("SELCORR_CLI_BIN"); }

struct RunResult {
  int exit_code = -1;
  std::string output;
};

RunResult run_cli(const std::string& args) {
  const std::string out_file =
      (std::filesystem::temp_directory_path() / "selcorr_cli_out.txt").string();
  const std::string cmd = std::string(cli_path()) + " " + args + " > " + out_file + " 2>&1";
  const int status = std::system(cmd.c_str());
  RunResult result;
  result.exit_code = WEXITSTATUS(status);
  std::ifstream in(out_file);
  std::ostringstream os;
  os << in.rdbuf();
  result.output = os.str();
  return result;
}

std::filesystem::path temp_dir() {
  const auto dir = std::filesystem::temp_directory_path() / "selcorr_cli_tests";
  std::filesystem::create_directories(dir);
  return dir;
}

std::string make_benchmark_csv(std::size_t n, std::uint64_t seed) {
  SimulationDesign design;
  design.n = n;
  design.c = 0.0938;
  const Dataset data = generate_sample(design, Rng(seed));
  const auto path = (temp_dir() / ("bench_" + std::to_string(n) + ".csv")).string();
  write_dataset_csv(path, data);
  return path;
}

}  // namespace

TEST_CASE("cli estimate prints a coefficient table and writes JSON") {
  if (!cli_path()) return;  // binary path not provided; exercised via ctest
  const std::string csv = make_benchmark_csv(300, 7);
  const auto json_path = (temp_dir() / "fit.json").string();
  const auto result = run_cli("estimate " + csv + " --estimator robinson --no-tune --seed 5 --out " +
                              json_path);
  CHECK(result.exit_code == 0);
  CHECK(result.output.find("estimate") != std::string::npos);
  CHECK(result.output.find("x10") != std::string::npos);
  CHECK(result.output.find("robinson") != std::string::npos);

  const std::string json = read_text_file(json_path);
  CHECK(json.find("\"estimator_tag\": \"robinson\"") != std::string::npos);
  CHECK(json.find("\"beta\"") != std::string::npos);
}

TEST_CASE("cli estimate rejects bad schema with exit 2") {
  if (!cli_path()) return;
  const auto bad = (temp_dir() / "bad.csv").string();
  write_text_file(bad, "d,y,x1\n2,1.0,0.5\n");
  const auto result = run_cli("estimate " + bad);
  CHECK(result.exit_code == 2);
}

TEST_CASE("cli estimate reports a degenerate design with exit 3") {
  if (!cli_path()) return;
  // A duplicated covariate makes the normal equations singular.
  SimulationDesign design;
  design.n = 150;
  design.c = 0.0938;
  const Dataset base = generate_sample(design, Rng(3));
  MatRM x(base.size(), 11);
  x.leftCols(10) = base.x();
  x.col(10) = base.x().col(0);
  auto names = base.column_names();
  names.push_back("x1_copy");
  const Dataset data(x, base.y(), base.d(), names);
  const auto path = (temp_dir() / "degenerate.csv").string();
  write_dataset_csv(path, data);
  const auto result = run_cli("estimate " + path + " --estimator robinson --no-tune --seed 2");
  CHECK(result.exit_code == 3);
}

TEST_CASE("cli simulate writes records, failures, and summaries deterministically") {
  if (!cli_path()) return;
  const auto out1 = temp_dir() / "sim1";
  const auto out2 = temp_dir() / "sim2";
  std::filesystem::remove_all(out1);
  std::filesystem::remove_all(out2);

  const std::string base =
      "simulate --n 150 --reps 2 --no-tune --seed 11 --censor 0.5 ";
  const auto r1 = run_cli(base + "--threads 1 --out " + out1.string());
  CHECK(r1.exit_code == 0);
  const auto r2 = run_cli(base + "--threads 2 --out " + out2.string());
  CHECK(r2.exit_code == 0);

  for (const char* name : {"records.csv", "summary.md", "summary.csv", "failures.csv"}) {
    CAPTURE(name);
    const std::string a = read_text_file((out1 / name).string());
    const std::string b = read_text_file((out2 / name).string());
    CHECK(a == b);  // byte-identical across worker counts
    CHECK(!a.empty());
  }
  CHECK(r1.output.find("Average Coverage") != std::string::npos);
}

TEST_CASE("cli calibrate prints the constant and caches it") {
  if (!cli_path()) return;
  const auto cache = (temp_dir() / "cal_cache.json").string();
  std::remove(cache.c_str());
  const auto first = run_cli("calibrate --censor 0.5 --seed 3 --cache " + cache);
  CHECK(first.exit_code == 0);
  CHECK(first.output.find("c = ") != std::string::npos);
  CHECK(first.output.find("cache hit") == std::string::npos);
  const auto second = run_cli("calibrate --censor 0.5 --seed 3 --cache " + cache);
  CHECK(second.exit_code == 0);
  CHECK(second.output.find("cache hit") != std::string::npos);
  // Same constant both times (the second line carries the cache-hit marker).
  const auto value_of = [](const std::string& out) {
    const auto start = out.find("c = ") + 4;
    return std::stod(out.substr(start));
  };
  CHECK(value_of(first.output) == value_of(second.output));
}

TEST_CASE("cli help documents every subcommand flag") {
  if (!cli_path()) return;
  for (const std::string sub : {"estimate", "simulate", "calibrate"}) {
    const auto result = run_cli(sub + " --help");
    CHECK(result.exit_code == 0);
    CHECK(result.output.find("--seed") != std::string::npos);
    CHECK(result.output.find("--threads") != std::string::npos);
    if (sub == "simulate") {
      CHECK(result.output.find("--repeated") != std::string::npos);
      CHECK(result.output.find("--reps") != std::string::npos);
    }
  }
}

TEST_CASE("cli config file drives a run with flag overrides") {
  if (!cli_path()) return;
  const auto config_path = (temp_dir() / "run.conf").string();
  write_text_file(config_path,
                  "[design]\nn = 120\ncensor_target = 0.5\n[estimator]\ntune_per_fit = false\n"
                  "[run]\nreps = 1\nseed = 9\n");
  const auto out = temp_dir() / "sim_config";
  std::filesystem::remove_all(out);
  const auto result = run_cli("simulate --config " + config_path + " --out " + out.string());
  CHECK(result.exit_code == 0);
  CHECK(std::filesystem::exists(out / "records.csv"));

  // Unknown config keys are rejected before any compute.
  write_text_file(config_path, "[design]\nwhat = 1\n");
  const auto bad = run_cli("simulate --config " + config_path);
  CHECK(bad.exit_code == 1);
}
