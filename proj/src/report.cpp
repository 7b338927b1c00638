#include "msb/report.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

namespace msb {

bool RunReport::all_passed() const {
  for (const auto& c : checks)
    if (!c.passed) return false;
  return true;
}

json RunReport::to_json() const {
  json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["config"] = config;
  doc["checks"] = json::array();
  for (const auto& c : checks) doc["checks"].push_back(msb::to_json(c));
  doc["params"] = params;
  doc["flops"] = flops;
  doc["scaling"] = scaling;
  doc["training"] = training;
  return doc;
}

namespace {

// JSON has no NaN; missing measurements become null.
json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

json to_json(const CheckResult& r) {
  return {{"name", r.name},         {"max_abs_diff", number_or_null(r.max_abs_diff)},
          {"threshold", r.threshold}, {"passed", r.passed},
          {"seeds_run", r.seeds_run}, {"detail", r.detail}};
}

json to_json(const ModelConfig& c) {
  return {{"variant", to_string(c.variant)}, {"seq_len", c.seq_len},     {"horizon", c.horizon},
          {"d_model", c.d_model},            {"heads", c.heads},         {"d_ff", c.ffn_width()},
          {"layers", c.layers},              {"norm", to_string(c.norm)}, {"sigma", to_string(c.sigma)},
          {"seed", c.seed}};
}

json to_json(const SineDatasetSpec& s) {
  return {{"period", s.period},
          {"amplitude", s.amplitude},
          {"samples", s.samples},
          {"input_len", s.input_len},
          {"horizon", s.horizon}};
}

json to_json(const TrainConfig& t) {
  return {{"epochs", t.epochs}, {"lr", t.lr}, {"batch", t.batch}, {"dropout", t.dropout}};
}

json to_json(const ParamCounts& p) {
  json roles = json::object();
  for (const auto& [role, n] : p.by_role) roles[role] = n;
  return {{"by_role", roles}, {"total", p.total()}};
}

json to_json(const FlopLedger& f) {
  json roles = json::object();
  for (const auto& [role, n] : f.multiply_adds) roles[role] = n;
  return {{"multiply_adds_by_role", roles},
          {"total_multiply_adds", f.total_multiply_adds()},
          {"total_flops", f.total_flops()},
          {"monarch_flops", 2 * f.monarch_multiply_adds}};
}

json to_json(const ScalingResult& s) {
  json wall = json::object();
  if (!s.wall_sizes.empty()) {
    wall = {{"sizes", s.wall_sizes}, {"seconds", s.wall_seconds}, {"slope", number_or_null(s.wall_slope)}};
  }
  return {{"sizes", s.sizes},
          {"monarch_flops", s.monarch_flops},
          {"dense_attention_flops", s.dense_flops},
          {"monarch_slope", s.monarch_slope},
          {"dense_slope", s.dense_slope},
          {"wall_clock", wall}};
}

json to_json(const TrainingResult& t) {
  json curve = json::array();
  for (const auto& e : t.curve) {
    curve.push_back({{"epoch", e.epoch},
                     {"train_loss", number_or_null(e.train_loss)},
                     {"val_loss", number_or_null(e.val_loss)}});
  }
  return {{"curve", curve},
          {"best_epoch", t.best_epoch},
          {"best_val_loss", number_or_null(t.best_val_loss)},
          {"test_mse", number_or_null(t.test_mse)},
          {"test_mae", number_or_null(t.test_mae)},
          {"param_count", t.param_count},
          {"seconds", t.seconds},
          {"failed", t.failed},
          {"failure", t.failure}};
}

std::vector<std::string> validate_report(const json& doc) {
  std::vector<std::string> problems;
  if (!doc.is_object()) return {"report is not a JSON object"};
  const char* keys[] = {"schema_version", "config", "checks", "params", "flops", "scaling", "training"};
  for (const char* k : keys)
    if (!doc.contains(k)) problems.push_back(std::string("missing top-level key '") + k + "'");
  if (!problems.empty()) return problems;
  if (!doc["schema_version"].is_string() || doc["schema_version"] != kSchemaVersion) {
    problems.push_back("schema_version must be \"" + std::string(kSchemaVersion) + "\"");
  }
  for (const char* k : {"config", "params", "flops", "scaling", "training"})
    if (!doc[k].is_object()) problems.push_back(std::string("'") + k + "' must be an object");
  if (!doc["checks"].is_array()) {
    problems.push_back("'checks' must be an array");
    return problems;
  }
  for (std::size_t i = 0; i < doc["checks"].size(); ++i) {
    const json& c = doc["checks"][i];
    const std::string where = "checks[" + std::to_string(i) + "]";
    if (!c.is_object()) {
      problems.push_back(where + " is not an object");
      continue;
    }
    bool typed = c.contains("name") && c["name"].is_string() && c.contains("max_abs_diff") &&
                 (c["max_abs_diff"].is_number() || c["max_abs_diff"].is_null()) && c.contains("threshold") &&
                 c["threshold"].is_number() && c.contains("passed") && c["passed"].is_boolean() &&
                 c.contains("seeds_run") && c["seeds_run"].is_number_unsigned();
    if (!typed) {
      problems.push_back(where + " lacks name/max_abs_diff/threshold/passed/seeds_run of the right types");
      continue;
    }
    const bool within = c["max_abs_diff"].is_number() &&
                        c["max_abs_diff"].get<double>() <= c["threshold"].get<double>();
    if (within != c["passed"].get<bool>()) problems.push_back(where + " 'passed' disagrees with diff vs threshold");
  }
  return problems;
}

namespace {

void flatten(const json& node, const std::string& path, std::ostringstream& os) {
  if (node.is_object()) {
    for (auto it = node.begin(); it != node.end(); ++it) flatten(it.value(), path.empty() ? it.key() : path + "." + it.key(), os);
  } else if (node.is_array()) {
    for (std::size_t i = 0; i < node.size(); ++i) flatten(node[i], path + "[" + std::to_string(i) + "]", os);
  } else {
    std::string value = node.is_string() ? node.get<std::string>() : node.dump();
    if (value.find_first_of(",\"\n") != std::string::npos) {
      std::string quoted = "\"";
      for (char ch : value) quoted += ch == '"' ? std::string("\"\"") : std::string(1, ch);
      value = quoted + "\"";
    }
    os << path << ',' << value << '\n';
  }
}

}  // namespace

std::string to_csv(const json& doc) {
  std::ostringstream os;
  os << "path,value\n";
  flatten(doc, "", os);
  return os.str();
}

std::string summarize(const json& doc) {
  std::ostringstream os;
  os << "schema " << doc.value("schema_version", std::string("?")) << '\n';
  if (doc.contains("checks") && doc["checks"].is_array() && !doc["checks"].empty()) {
    std::size_t passed = 0;
    for (const auto& c : doc["checks"]) {
      const bool ok = c.value("passed", false);
      passed += ok;
      os << (ok ? "  PASS " : "  FAIL ") << std::left << std::setw(26) << c.value("name", std::string("?"))
         << " diff=" << c["max_abs_diff"].dump() << " threshold=" << c["threshold"].dump() << '\n';
    }
    os << "checks: " << passed << '/' << doc["checks"].size() << " passed\n";
  }
  if (doc.contains("params") && doc["params"].contains("ratio")) os << "param ratio " << doc["params"]["ratio"] << '\n';
  if (doc.contains("flops") && doc["flops"].contains("ratio")) os << "flop ratio " << doc["flops"]["ratio"] << '\n';
  if (doc.contains("scaling") && doc["scaling"].contains("monarch_slope")) {
    os << "slopes: monarch " << doc["scaling"]["monarch_slope"] << ", dense " << doc["scaling"]["dense_slope"];
    if (doc["scaling"]["wall_clock"].contains("slope")) os << ", wall-clock " << doc["scaling"]["wall_clock"]["slope"];
    os << '\n';
  }
  if (doc.contains("training") && doc["training"].contains("test_mse")) {
    const auto& t = doc["training"];
    os << "training: test MSE " << t["test_mse"] << ", MAE " << t["test_mae"] << ", best epoch " << t["best_epoch"]
       << (t.value("failed", false) ? " (FAILED: " + t.value("failure", std::string()) + ")" : std::string()) << '\n';
  }
  return os.str();
}

}  // namespace msb
