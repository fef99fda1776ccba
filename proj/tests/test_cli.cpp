// Copyright 2026 The crabloop Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <doctest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

#include "crabloop/control_loop.hpp"
#include "crabloop/records.hpp"
#include "crabloop/run_config.hpp"
#include "crabloop/tof_analysis.hpp"

using namespace crabloop;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

fs::path temp_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "crabloop_test_cli" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::size_t line_count(const fs::path& p) {
  std::istringstream in(slurp(p));
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) ++n;
  return n;
}

Run run(const std::string& args, const std::string& env = "") {
  static int counter = 0;
  const auto dir = fs::temp_directory_path() / "crabloop_test_cli";
  fs::create_directories(dir);
  const auto out = dir / ("stdout_" + std::to_string(counter) + ".txt");
  const auto err = dir / ("stderr_" + std::to_string(counter++) + ".txt");
  const std::string cmd = env + " " + CRABLOOP_CLI + " " + args + " >" + out.string() + " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

// Small plant so the whole loop runs in well under a second.
fs::path write_small_config(const fs::path& dir, const std::string& mode = "crab_sfmi") {
  Json c = {
      {"mode", mode},
      {"master_seed", 11},
      {"plant", {{"sites", 3}, {"bosons", 3}, {"kappa", 0.5}, {"samples_per_ms", 2.0}}},
      {"ramp", {{"delta_t_ms", 20.0}, {"tau_ms", 4.0}, {"s_max_Er", 25.0}}},
      {"optimizer", {{"max_evals", 12}}},
      {"exponential", {{"delta_t0_ms", 15.0}, {"tau0_ms", 3.0}}},
      {"landscape", {{"delta_t_points", 3}, {"tau_points", 2}, {"delta_t_max_ms", 30.0}}},
      {"output", {{"dir", (dir / "out").string()}}},
  };
  const auto path = dir / "config.json";
  std::ofstream(path) << c.dump(2);
  return path;
}

}  // namespace

TEST_CASE("optimize writes the four outputs") {
  const auto dir = temp_dir("optimize");
  const auto cfg = write_small_config(dir);
  const Run r = run("optimize -c " + cfg.string());
  REQUIRE(r.code == 0);
  for (const char* f : {"iterations.jsonl", "optimum.json", "optimal_waveform.csv", "fom_vs_iteration.csv"}) {
    CHECK(fs::exists(dir / "out" / f));
  }
  // header + 2 references + 12 evaluations + summary
  CHECK(line_count(dir / "out" / "iterations.jsonl") == 16);
}

TEST_CASE("missing config exits 2 and names the path") {
  const Run r = run("optimize -c /nonexistent/cfg.json");
  CHECK(r.code == 2);
  const Json err = Json::parse(r.err);
  CHECK(err["type"] == "error");
  CHECK(err["kind"] == "config");
  CHECK(err["exit_code"] == 2);
  CHECK(err["message"].get<std::string>().find("/nonexistent/cfg.json") != std::string::npos);
}

TEST_CASE("budget override sets the record count") {
  const auto dir = temp_dir("budget");
  const auto cfg = write_small_config(dir, "exponential_2param");
  const Run r = run("optimize -c " + cfg.string() + " --override optimizer.max_evals=5");
  REQUIRE(r.code == 0);
  const LogContents log = read_log((dir / "out" / "iterations.jsonl").string());
  CHECK(log.records.size() == 5 + 2);

  // Five evaluations cannot seed a four-coefficient simplex.
  const auto crab = temp_dir("budget_crab");
  const auto crab_cfg = write_small_config(crab);
  CHECK(run("optimize -c " + crab_cfg.string() + " --override optimizer.max_evals=5").code == 2);
  REQUIRE(run("optimize -c " + crab_cfg.string() + " --override optimizer.max_evals=6").code == 0);
  CHECK(read_log((crab / "out" / "iterations.jsonl").string()).records.size() == 6 + 2);
}

TEST_CASE("bad overrides and seeds are config errors") {
  const auto dir = temp_dir("bad");
  const auto cfg = write_small_config(dir);
  CHECK(run("optimize -c " + cfg.string() + " --override optimizer.max_eval=5").code == 2);
  CHECK(run("optimize -c " + cfg.string() + " --override plant.sites=two").code == 2);
  CHECK(run("optimize -c " + cfg.string(), "CRABLOOP_SEED=abc").code == 2);
  CHECK(run("frobnicate").code == 2);
}

TEST_CASE("CRABLOOP_SEED overrides master_seed") {
  const auto a = temp_dir("seed_env");
  const auto b = temp_dir("seed_override");
  const auto cfg_a = write_small_config(a);
  const auto cfg_b = write_small_config(b);
  REQUIRE(run("optimize -c " + cfg_a.string(), "CRABLOOP_SEED=4242").code == 0);
  REQUIRE(run("optimize -c " + cfg_b.string() + " --override master_seed=4242").code == 0);
  const LogContents la = read_log((a / "out" / "iterations.jsonl").string());
  const LogContents lb = read_log((b / "out" / "iterations.jsonl").string());
  CHECK(la.header["config"]["master_seed"] == 4242);
  REQUIRE(la.records.size() == lb.records.size());
  for (std::size_t i = 0; i < la.records.size(); ++i) {
    CHECK(la.records[i].seed == evaluation_seed(4242, la.records[i].n));
    CHECK(la.records[i].fom == lb.records[i].fom);
  }
}

TEST_CASE("subcommands are idempotent") {
  const auto dir = temp_dir("idem");
  const auto cfg = write_small_config(dir);
  const auto out = dir / "out";
  REQUIRE(run("optimize -c " + cfg.string()).code == 0);
  const std::string log1 = slurp(out / "iterations.jsonl");
  const std::string opt1 = slurp(out / "optimum.json");
  const std::string wf1 = slurp(out / "optimal_waveform.csv");
  REQUIRE(run("optimize -c " + cfg.string()).code == 0);
  CHECK(slurp(out / "iterations.jsonl") == log1);
  CHECK(slurp(out / "optimum.json") == opt1);
  CHECK(slurp(out / "optimal_waveform.csv") == wf1);

  REQUIRE(run("map -c " + cfg.string()).code == 0);
  const std::string map1 = slurp(out / "landscape_fom.csv");
  REQUIRE(run("map -c " + cfg.string()).code == 0);
  CHECK(slurp(out / "landscape_fom.csv") == map1);

  REQUIRE(run("export --log " + (out / "iterations.jsonl").string()).code == 0);
  const std::string csv1 = slurp(out / "iterations.jsonl.csv");
  REQUIRE(run("export --log " + (out / "iterations.jsonl").string()).code == 0);
  CHECK(slurp(out / "iterations.jsonl.csv") == csv1);
  CHECK(line_count(out / "iterations.jsonl.csv") == 15);
}

TEST_CASE("resume of a finished run adds nothing") {
  const auto dir = temp_dir("resume");
  const auto cfg = write_small_config(dir);
  REQUIRE(run("optimize -c " + cfg.string()).code == 0);
  const std::string log1 = slurp(dir / "out" / "iterations.jsonl");
  REQUIRE(run("optimize --resume -c " + cfg.string()).code == 0);
  CHECK(slurp(dir / "out" / "iterations.jsonl") == log1);
  CHECK(run("optimize --resume -c " + cfg.string() + " --override plant.noise_sigma=0.05").code == 2);
}

TEST_CASE("map writes landscape CSVs") {
  const auto dir = temp_dir("map");
  const auto cfg = write_small_config(dir, "landscape_map");
  REQUIRE(run("map -c " + cfg.string()).code == 0);
  CHECK(line_count(dir / "out" / "landscape_fom.csv") >= 3);
  CHECK(fs::exists(dir / "out" / "landscape_delta_t_ms.csv"));
  CHECK(fs::exists(dir / "out" / "landscape_tau_ms.csv"));
}

TEST_CASE("eval-ramp prints and saves one reference record") {
  const auto dir = temp_dir("eval");
  const auto cfg = write_small_config(dir);
  const Run r = run("eval-ramp -c " + cfg.string() + " --reference quasi_adiabatic");
  REQUIRE(r.code == 0);
  const Json printed = Json::parse(r.out);
  CHECK(printed["phase"] == "reference");
  CHECK(printed["label"] == "quasi_adiabatic");
  CHECK(printed["fom"].get<double>() >= 0.0);
  CHECK(Json::parse(slurp(dir / "out" / "eval_ramp.json")) == printed);

  const Run custom = run("eval-ramp -c " + cfg.string() + " --delta-t-ms 20 --tau-ms 4 --coeffs 0.1,0,0,0");
  REQUIRE(custom.code == 0);
  CHECK(Json::parse(custom.out)["label"] == "custom");
  CHECK(run("eval-ramp -c " + cfg.string() + " --reference fast").code == 2);
  CHECK(run("eval-ramp -c " + cfg.string() + " --delta-t-ms 20 --tau-ms 4 --coeffs 0.1").code == 2);
}

TEST_CASE("fit-tof recovers the generating thermal fraction") {
  const auto dir = temp_dir("fit");
  const BimodalModel truth{2.0, 5.0, 0.35, 10.0, 0.7};
  const double nc = 16.0 / 15.0 * truth.n_c0 * truth.radius;
  const double nt = std::sqrt(2.0 * M_PI) * truth.n_t0 * truth.sigma_t;
  const double tf = nt / (nc + nt);
  write_profile_csv((dir / "profile.csv").string(), synth_profile(truth, uniform_grid(-40.0, 40.0, 401), 0.0, 1));
  const Run r = run("fit-tof --profile " + (dir / "profile.csv").string() + " -o " + dir.string() +
                    " --tf-initial " + std::to_string(2.0 * tf));
  REQUIRE(r.code == 0);
  const Json fit = Json::parse(slurp(dir / "fit_result.json"));
  CHECK(fit["converged"] == true);
  CHECK(fit["thermal_fraction"].get<double>() == doctest::Approx(tf).epsilon(1e-6));
  CHECK(fit["fom"].get<double>() == doctest::Approx(0.5).epsilon(1e-5));

  const double peak = truth.n_c0 + truth.n_t0;
  write_profile_csv((dir / "noisy.csv").string(),
                    synth_profile(truth, uniform_grid(-25.0, 25.0, 1001), peak / 20.0, 3));
  const Run noisy = run("fit-tof --profile " + (dir / "noisy.csv").string() + " -o " + dir.string() +
                        " --noise-sigma " + std::to_string(peak / 20.0));
  REQUIRE(noisy.code == 0);
  CHECK(std::abs(Json::parse(noisy.out)["thermal_fraction"].get<double>() - tf) < 0.05);

  CHECK(run("fit-tof --profile " + (dir / "absent.csv").string() + " -o " + dir.string()).code == 3);
  CHECK(run("fit-tof -o " + dir.string()).code == 2);
}

TEST_CASE("export of an empty log is header only") {
  const auto dir = temp_dir("export");
  std::ofstream(dir / "empty.jsonl").close();
  REQUIRE(run("export --log " + (dir / "empty.jsonl").string() + " -o " + (dir / "e.csv").string()).code == 0);
  CHECK(line_count(dir / "e.csv") == 1);
  CHECK(run("export --log " + (dir / "empty.jsonl").string() + " --format parquet").code == 2);
}

TEST_CASE("help lists every override key") {
  const Run r = run("optimize --help");
  CHECK(r.code == 0);
  for (const auto& key : config_keys()) CHECK_MESSAGE(r.out.find(key) != std::string::npos, key);
  CHECK(r.out.find("CRABLOOP_SEED") != std::string::npos);
}
