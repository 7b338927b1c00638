#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "msb/bench.hpp"
#include "msb/training.hpp"
#include "msb/verification.hpp"

namespace msb {

using json = nlohmann::ordered_json;

inline constexpr const char* kSchemaVersion = "msb-run-report/1";

/// Serialized results of one CLI run. Sections that were not run stay
/// empty objects (or an empty array for checks).
struct RunReport {
  json config = json::object();
  std::vector<CheckResult> checks;
  json params = json::object();
  json flops = json::object();
  json scaling = json::object();
  json training = json::object();

  bool all_passed() const;
  json to_json() const;
};

json to_json(const CheckResult& r);
json to_json(const ModelConfig& c);
json to_json(const SineDatasetSpec& s);
json to_json(const TrainConfig& t);
json to_json(const ParamCounts& p);
json to_json(const FlopLedger& f);
json to_json(const ScalingResult& s);
json to_json(const TrainingResult& t);

/// Problems found in a report document; empty means schema-valid.
std::vector<std::string> validate_report(const json& doc);

/// One `path,value` row per leaf, header included.
std::string to_csv(const json& doc);

/// Short human-readable digest for `report show`.
std::string summarize(const json& doc);

}  // namespace msb
