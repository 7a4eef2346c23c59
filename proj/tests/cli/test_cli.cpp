#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "../support/schema_check.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

RunResult run_cli(const std::string& args) {
  static int counter = 0;
  const fs::path outfile = fs::temp_directory_path() /
                           ("zee_cli_out_" + std::to_string(counter) + ".txt");
  const fs::path errfile = fs::temp_directory_path() /
                           ("zee_cli_err_" + std::to_string(counter) + ".txt");
  ++counter;
  const std::string cmd = std::string(ZEE_BIN) + " " + args + " > " +
                          outfile.string() + " 2> " + errfile.string();
  const int status = std::system(cmd.c_str());
  RunResult result;
  result.exit_code = WEXITSTATUS(status);
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  result.out = slurp(outfile);
  result.err = slurp(errfile);
  fs::remove(outfile);
  fs::remove(errfile);
  return result;
}

fs::path sandbox() {
  const fs::path dir = fs::temp_directory_path() / "zee_cli_sandbox";
  fs::create_directories(dir);
  return dir;
}

fs::path write_file(const std::string& name, const std::string& contents) {
  const fs::path p = sandbox() / name;
  std::ofstream out(p);
  out << contents;
  return p;
}

json load_schema(const std::string& name) {
  std::ifstream in(fs::path(ZEE_SCHEMA_DIR) / name);
  REQUIRE(in.good());
  json j;
  in >> j;
  return j;
}

const char* kRsToy =
    "time,event,z1,z2\n"
    "0.5,1,0.2,1.0\n"
    "1.2,0,-0.3,0.5\n"
    "0.9,1,0.8,0.1\n"
    "1.4,1,0.5,0.9\n"
    "2.5,0,0.0,0.0\n"
    "1.7,1,-0.6,0.4\n";

const char* kTwoPhase =
    "time,event,selected,prob,z1,vtilde1,vtilde2\n"
    "0.4,1,1,1.0,0.8,1,0.7\n"
    "0.9,0,0,0.5,,1,-0.1\n"
    "1.3,1,1,1.0,0.5,1,0.6\n"
    "1.6,1,1,1.0,-0.7,1,-0.8\n"
    "0.7,0,1,0.5,0.3,1,0.2\n"
    "1.1,1,1,1.0,1.1,1,1.0\n"
    "2.2,0,0,0.5,,1,-0.5\n"
    "2.0,1,1,1.0,0.2,1,0.3\n"
    "1.8,0,1,0.5,0.4,1,0.5\n"
    "2.1,0,1,0.5,-0.2,1,-0.3\n";

}  // namespace

TEST_CASE("fit: RS toy file exits 0 and validates against the schema") {
  const fs::path csv = write_file("rs_toy.csv", kRsToy);
  const RunResult r =
      run_cli("fit --data " + csv.string() + " --tau 2.0");
  REQUIRE(r.exit_code == 0);
  const json out = json::parse(r.out);
  const std::string violation =
      zee::test::schema_violation(load_schema("fit_result-v1.schema.json"), out);
  CHECK(violation == "");
  CHECK(out.at("scheme") == "rs");
  CHECK(out.at("theta").size() == 2);
}

TEST_CASE("fit: calibrated scheme without auxiliaries is a data error") {
  const fs::path csv = write_file("rs_toy2.csv", kRsToy);
  const RunResult r =
      run_cli("fit --data " + csv.string() + " --tau 2.0 --scheme cal");
  CHECK(r.exit_code == 2);
}

TEST_CASE("fit: constant covariate is a numerical error") {
  const fs::path csv = write_file(
      "flat.csv", "time,event,z1\n0.5,1,1.0\n1.2,1,1.0\n2.5,0,1.0\n");
  const RunResult r = run_cli("fit --data " + csv.string() + " --tau 2.0");
  CHECK(r.exit_code == 3);
  CHECK(r.err.find("A.8") != std::string::npos);
}

TEST_CASE("fit: oracle check on a 10-row file") {
  const fs::path csv = write_file("two_phase.csv", kTwoPhase);
  const RunResult r = run_cli("fit --data " + csv.string() +
                              " --tau 2.0 --scheme ipw --oracle-check");
  REQUIRE(r.exit_code == 0);
  const json out = json::parse(r.out);
  CHECK(out.at("oracle_max_residual").get<double>() <= 1e-8);
  CHECK(out.at("oracle_root_gap").get<double>() <= 1e-8);
}

TEST_CASE("fit: output directory carries exactly one manifest") {
  const fs::path csv = write_file("rs_toy3.csv", kRsToy);
  const fs::path outdir = sandbox() / "fit_out";
  fs::remove_all(outdir);
  const RunResult r1 = run_cli("fit --data " + csv.string() +
                               " --tau 2.0 --predict 0.5,0.5@1.0 --out " +
                               outdir.string() + " --lambda-csv lambda.csv");
  REQUIRE(r1.exit_code == 0);
  CHECK(fs::exists(outdir / "result.json"));
  CHECK(fs::exists(outdir / "lambda.csv"));
  int manifests = 0;
  for (const auto& e : fs::directory_iterator(outdir))
    if (e.path().filename().string().find("manifest") != std::string::npos)
      ++manifests;
  CHECK(manifests == 1);

  std::ifstream in1(outdir / "result.json");
  std::stringstream first;
  first << in1.rdbuf();
  const RunResult r2 = run_cli("fit --data " + csv.string() +
                               " --tau 2.0 --predict 0.5,0.5@1.0 --out " +
                               outdir.string() + " --lambda-csv lambda.csv");
  REQUIRE(r2.exit_code == 0);
  std::ifstream in2(outdir / "result.json");
  std::stringstream second;
  second << in2.rdbuf();
  CHECK(first.str() == second.str());

  const json manifest = json::parse(std::ifstream(outdir / "manifest.json"));
  CHECK(manifest.at("command") == "fit");
  CHECK(manifest.at("inputs").size() == 1);
}

TEST_CASE("calibrate: complete sample reports gamma at zero") {
  const fs::path csv = write_file(
      "complete.csv",
      "time,event,z1,vtilde1\n0.5,1,0.2,1.0\n1.2,0,-0.3,0.4\n2.5,0,0.0,0.8\n");
  const RunResult r = run_cli("calibrate --data " + csv.string() + " --tau 2.0");
  REQUIRE(r.exit_code == 0);
  const json out = json::parse(r.out);
  const std::string violation = zee::test::schema_violation(
      load_schema("calibration-v1.schema.json"), out);
  CHECK(violation == "");
  CHECK(std::abs(out.at("gamma").at(0).get<double>()) <= 1e-10);
}

TEST_CASE("calibrate: two-phase file solves to tolerance") {
  const fs::path csv = write_file("two_phase2.csv", kTwoPhase);
  const RunResult r = run_cli("calibrate --data " + csv.string() + " --tau 2.0");
  REQUIRE(r.exit_code == 0);
  const json out = json::parse(r.out);
  CHECK(out.at("residual_max_norm").get<double>() <= 1e-10);
  CHECK(out.at("converged") == true);
}

TEST_CASE("calibrate: singular auxiliary design names the assumption") {
  const fs::path csv = write_file(
      "singular.csv",
      "time,event,selected,prob,z1,vtilde1,vtilde2\n"
      "0.5,1,1,0.5,0.2,1.0,2.0\n"
      "1.2,0,1,0.5,-0.3,0.5,1.0\n"
      "2.5,0,0,0.5,,0.4,0.8\n");
  const RunResult r = run_cli("calibrate --data " + csv.string() + " --tau 2.0");
  CHECK(r.exit_code == 3);
  CHECK(r.err.find("A.6") != std::string::npos);
}

TEST_CASE("simulate: zero replicates is a data error") {
  const RunResult r =
      run_cli(std::string("simulate --config ") + ZEE_CONFIG_DIR +
              "/example.toml --replicates 0");
  CHECK(r.exit_code == 2);
}

TEST_CASE("simulate: repeated seed reproduces report.json byte for byte") {
  const fs::path cfg = write_file("small.json", R"({
    "n": 200, "replicates": 30, "seed": 5,
    "theta0": [0.5, -0.3], "baseline": 0.5,
    "covariate_ranges": [[0.0, 1.0], [0.0, 1.0]],
    "tau": 2.0, "c_max": 4.0,
    "targets": { "s_star": 1.0, "z_star": [0.5, 0.5] }
  })");
  const fs::path out1 = sandbox() / "sim1";
  const fs::path out2 = sandbox() / "sim2";
  fs::remove_all(out1);
  fs::remove_all(out2);
  const RunResult r1 = run_cli("simulate --config " + cfg.string() +
                               " --out " + out1.string() + " --jobs 1");
  const RunResult r2 = run_cli("simulate --config " + cfg.string() +
                               " --out " + out2.string() + " --jobs 2");
  REQUIRE(r1.exit_code == 0);
  REQUIRE(r2.exit_code == 0);
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  CHECK(slurp(out1 / "report.json") == slurp(out2 / "report.json"));

  const json report = json::parse(slurp(out1 / "report.json"));
  const std::string violation = zee::test::schema_violation(
      load_schema("simulation_report-v1.schema.json"), report);
  CHECK(violation == "");
}

TEST_CASE("simulate: the TOML surface parses and runs") {
  const RunResult r =
      run_cli(std::string("simulate --config ") + ZEE_CONFIG_DIR +
              "/example.toml --replicates 20 --seed 9");
  REQUIRE(r.exit_code == 0);
  CHECK(r.out.find("simulation report") != std::string::npos);
}
