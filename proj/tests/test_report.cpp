#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>

#include "msb/config.hpp"
#include "msb/errors.hpp"

using namespace msb;

TEST_CASE("report carries the fixed top-level keys") {
  RunReport r;
  r.checks.push_back(CheckResult::make("a", 0.5, 1.0, 3));
  const json doc = r.to_json();
  std::vector<std::string> keys;
  for (auto it = doc.begin(); it != doc.end(); ++it) keys.push_back(it.key());
  CHECK(keys == std::vector<std::string>{"schema_version", "config", "checks", "params", "flops", "scaling",
                                         "training"});
  CHECK(doc["schema_version"] == kSchemaVersion);
  CHECK(doc["checks"][0]["passed"] == true);
  CHECK(validate_report(doc).empty());
  CHECK(r.all_passed());
}

TEST_CASE("validation catches structural problems") {
  json doc = RunReport{}.to_json();
  doc.erase("flops");
  CHECK_FALSE(validate_report(doc).empty());

  RunReport r;
  r.checks.push_back(CheckResult::make("a", 0.5, 1.0, 3));
  json bad = r.to_json();
  bad["checks"][0]["passed"] = false;
  CHECK(validate_report(bad).size() == 1);
  bad = r.to_json();
  bad["schema_version"] = "0";
  CHECK(validate_report(bad).size() == 1);
  CHECK_FALSE(validate_report(json::array()).empty());
}

TEST_CASE("non-finite values serialize as null") {
  TrainingResult t;
  t.test_mse = NAN;
  CHECK(to_json(t)["test_mse"].is_null());
  RunReport r;
  r.checks.push_back(CheckResult::make("x", INFINITY, 0.0, 1));
  CHECK(validate_report(r.to_json()).empty());
}

TEST_CASE("CSV flattening") {
  RunReport r;
  r.config = {{"seed", 3}, {"note", "a,b"}};
  r.checks.push_back(CheckResult::make("c", 0.0, 1.0, 1));
  const std::string csv = to_csv(r.to_json());
  CHECK(csv.rfind("path,value\n", 0) == 0);
  CHECK(csv.find("config.seed,3\n") != std::string::npos);
  CHECK(csv.find("config.note,\"a,b\"\n") != std::string::npos);
  CHECK(csv.find("checks[0].name,c\n") != std::string::npos);
}

TEST_CASE("config overlays") {
  ModelConfig m;
  apply_json(json{{"d_model", 32}, {"variant", "dense"}, {"norm", "post-ln"}}, m);
  CHECK(m.d_model == 32);
  CHECK(m.variant == Variant::dense);
  CHECK(m.norm == NormStyle::post_ln);
  CHECK_THROWS_AS(apply_json(json{{"width", 3}}, m), ConfigError);
  CHECK_THROWS_AS(apply_json(json{{"d_model", "big"}}, m), ConfigError);
  CHECK_THROWS_AS(apply_json(json{{"d_model", -4}}, m), ConfigError);

  TrainConfig t;
  apply_json(json{{"lr", 0.01}, {"epochs", 5}}, t);
  CHECK(t.lr == 0.01);
  CHECK(t.epochs == 5);

  VerifyConfig v;
  apply_json(json{{"seeds", 7}, {"checks", {"param_law"}}}, v);
  CHECK(v.seeds == 7);
  CHECK(v.selection->front() == "param_law");

  CHECK_THROWS_AS(check_config_keys(json{{"modle", json::object()}}), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);
}

TEST_CASE("seed precedence: flag, then MSB_SEED, then config, then 0") {
  unsetenv("MSB_SEED");
  CHECK(resolve_seed(std::nullopt, json::object()) == 0);
  CHECK(resolve_seed(std::nullopt, json{{"seed", 5}}) == 5);
  setenv("MSB_SEED", "9", 1);
  CHECK(resolve_seed(std::nullopt, json{{"seed", 5}}) == 9);
  CHECK(resolve_seed(std::uint64_t{4}, json{{"seed", 5}}) == 4);
  setenv("MSB_SEED", "nine", 1);
  CHECK_THROWS_AS(resolve_seed(std::nullopt, json::object()), ConfigError);
  unsetenv("MSB_SEED");
  CHECK(parse_seed("18446744073709551615") == 18446744073709551615ULL);
  CHECK_THROWS_AS(parse_seed("18446744073709551616"), ConfigError);
  CHECK_THROWS_AS(parse_seed("-1"), ConfigError);
}
