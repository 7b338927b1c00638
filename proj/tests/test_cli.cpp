#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "msb/report.hpp"

using namespace msb;

namespace {

struct Run {
  int code;
  std::string out;
};

Run run(const std::string& args) {
  const std::string cmd = std::string(MSB_CLI_PATH) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::string out;
  char buf[512];
  while (std::fgets(buf, sizeof buf, pipe)) out += buf;
  const int status = pclose(pipe);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

std::filesystem::path scratch(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("msb_cli_test_" + name);
}

json read_json(const std::filesystem::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

}  // namespace

TEST_CASE("usage errors exit with 2") {
  CHECK(run("").code == 2);
  CHECK(run("frobnicate").code == 2);
  CHECK(run("verify --bogus").code == 2);
  CHECK(run("verify --format xml").code == 2);
  CHECK(run("bench").code == 2);
  CHECK(run("bench nothing").code == 2);
  CHECK(run("verify --seed abc").code == 2);
  CHECK(run("verify --checks no_such_check").code == 2);
  CHECK(run("verify --config /nonexistent.json").code == 2);
  CHECK(run("train sine --variant sparse").code == 2);
  CHECK(run("--help").code == 0);
}

TEST_CASE("verify writes a schema-valid JSON report") {
  const auto path = scratch("verify.json");
  const Run r = run("verify --seed 42 --seeds 3 --checks param_law,lti_memoryless --out " + path.string());
  CHECK(r.code == 0);
  const json doc = read_json(path);
  CHECK(validate_report(doc).empty());
  CHECK(doc["config"]["seed"] == 42);
  CHECK(doc["checks"].size() == 2);
  CHECK(run("report show " + path.string()).code == 0);
  CHECK(run("report show " + path.string() + " --format csv").out.find("path,value") == 0);
  std::filesystem::remove(path);
}

TEST_CASE("a failing check exits with 1") {
  CHECK(run("verify --seeds 2 --checks monarch_oracle --threshold 0").code == 1);
}

TEST_CASE("MSB_SEED sets the default seed and the flag wins") {
  const auto path = scratch("seed.json");
  CHECK(run("verify --checks param_law --format json > " + path.string()).code == 0);
  CHECK(read_json(path)["config"]["seed"] == 0);
  setenv("MSB_SEED", "17", 1);
  CHECK(run("verify --checks param_law --format json > " + path.string()).code == 0);
  CHECK(read_json(path)["config"]["seed"] == 17);
  CHECK(run("verify --seed 5 --checks param_law --format json > " + path.string()).code == 0);
  CHECK(read_json(path)["config"]["seed"] == 5);
  unsetenv("MSB_SEED");
  std::filesystem::remove(path);
}

TEST_CASE("config file feeds the run") {
  const auto cfg = scratch("cfg.json");
  const auto out = scratch("cfg_out.json");
  std::ofstream(cfg) << R"({"seed": 8, "verify": {"seeds": 2, "checks": ["param_law"]}})";
  CHECK(run("verify --config " + cfg.string() + " --out " + out.string()).code == 0);
  const json doc = read_json(out);
  CHECK(doc["config"]["seed"] == 8);
  CHECK(doc["config"]["seeds"] == 2);
  std::ofstream(cfg) << R"({"verify": {"seedz": 2}})";
  CHECK(run("verify --config " + cfg.string()).code == 2);
  std::filesystem::remove(cfg);
  std::filesystem::remove(out);
}

TEST_CASE("bench subcommands") {
  const auto path = scratch("bench.json");
  CHECK(run("bench params --out " + path.string()).code == 0);
  const json p = read_json(path);
  CHECK(validate_report(p).empty());
  CHECK(p["params"]["ratio"].get<double>() > 0.15);
  run("bench flops --out " + path.string());
  CHECK(read_json(path)["flops"].contains("ratio"));
  CHECK(run("bench scaling --sizes 256,1024,4096 --no-wall-clock --format csv").out.find("scaling.monarch_slope,1.5") !=
        std::string::npos);
  std::filesystem::remove(path);
}

TEST_CASE("train sine writes the dataset CSV and a training section") {
  const auto csv = scratch("sine.csv");
  const auto out = scratch("train.json");
  const Run r = run("train sine --period 8 --samples 200 --input-len 16 --horizon 4 --d-model 4 --heads 1 --epochs 2 "
                    "--dataset-out " + csv.string() + " --out " + out.string());
  CHECK((r.code == 0 || r.code == 1));
  std::ifstream in(csv);
  std::string header;
  std::getline(in, header);
  CHECK(header == "t,value");
  const json doc = read_json(out);
  CHECK(validate_report(doc).empty());
  CHECK(doc["training"]["curve"].size() == 3);
  std::filesystem::remove(csv);
  std::filesystem::remove(out);
}

TEST_CASE("report show rejects an invalid report") {
  const auto path = scratch("bad.json");
  std::ofstream(path) << R"({"schema_version": "msb-run-report/1"})";
  CHECK(run("report show " + path.string()).code == 1);
  std::filesystem::remove(path);
}
