#include "msb/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>

#include "msb/errors.hpp"

namespace msb {

namespace {

template <typename T>
T read(const json& doc, const std::string& key) {
  try {
    return doc.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key '" + key + "' has the wrong type: " + doc.at(key).dump());
  }
}

std::size_t read_size(const json& doc, const std::string& key) {
  const json& v = doc.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    if (!v.is_number_unsigned()) throw ConfigError("config key '" + key + "' must be a non-negative integer");
  }
  return v.get<std::size_t>();
}

void require_object(const json& doc, const char* what, std::initializer_list<const char*> allowed) {
  if (!doc.is_object()) throw ConfigError(std::string(what) + " config must be an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    if (!ok.count(it.key())) throw ConfigError(std::string("unknown ") + what + " config key '" + it.key() + "'");
  }
}

}  // namespace

void apply_json(const json& doc, ModelConfig& c) {
  require_object(doc, "model",
                 {"variant", "seq_len", "horizon", "d_model", "heads", "d_ff", "layers", "norm", "sigma", "seed"});
  if (doc.contains("variant")) c.variant = parse_variant(read<std::string>(doc, "variant"));
  if (doc.contains("seq_len")) c.seq_len = read_size(doc, "seq_len");
  if (doc.contains("horizon")) c.horizon = read_size(doc, "horizon");
  if (doc.contains("d_model")) c.d_model = read_size(doc, "d_model");
  if (doc.contains("heads")) c.heads = read_size(doc, "heads");
  if (doc.contains("d_ff")) c.d_ff = read_size(doc, "d_ff");
  if (doc.contains("layers")) c.layers = read_size(doc, "layers");
  if (doc.contains("norm")) c.norm = parse_norm_style(read<std::string>(doc, "norm"));
  if (doc.contains("sigma")) c.sigma = parse_activation(read<std::string>(doc, "sigma"));
  if (doc.contains("seed")) c.seed = read_size(doc, "seed");
}

void apply_json(const json& doc, SineDatasetSpec& s) {
  require_object(doc, "dataset", {"period", "amplitude", "samples", "input_len", "horizon"});
  if (doc.contains("period")) s.period = read<double>(doc, "period");
  if (doc.contains("amplitude")) s.amplitude = read<double>(doc, "amplitude");
  if (doc.contains("samples")) s.samples = read_size(doc, "samples");
  if (doc.contains("input_len")) s.input_len = read_size(doc, "input_len");
  if (doc.contains("horizon")) s.horizon = read_size(doc, "horizon");
}

void apply_json(const json& doc, TrainConfig& t) {
  require_object(doc, "train", {"epochs", "lr", "batch", "dropout"});
  if (doc.contains("epochs")) t.epochs = read_size(doc, "epochs");
  if (doc.contains("lr")) t.lr = read<double>(doc, "lr");
  if (doc.contains("batch")) t.batch = read_size(doc, "batch");
  if (doc.contains("dropout")) t.dropout = read<double>(doc, "dropout");
}

void apply_json(const json& doc, VerifyConfig& v) {
  require_object(doc, "verify", {"seeds", "threshold", "checks"});
  if (doc.contains("seeds")) v.seeds = read_size(doc, "seeds");
  if (doc.contains("threshold")) v.threshold_override = read<double>(doc, "threshold");
  if (doc.contains("checks")) v.selection = read<std::vector<std::string>>(doc, "checks");
}

json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  check_config_keys(doc);
  return doc;
}

void check_config_keys(const json& doc) {
  require_object(doc, "top-level", {"seed", "model", "dataset", "train", "verify", "scaling"});
}

std::uint64_t parse_seed(const std::string& text) {
  if (text.empty() || text.find_first_not_of("0123456789") != std::string::npos) {
    throw ConfigError("seed must be a non-negative integer, got '" + text + "'");
  }
  try {
    return std::stoull(text);
  } catch (const std::out_of_range&) {
    throw ConfigError("seed '" + text + "' does not fit in 64 bits");
  }
}

std::uint64_t resolve_seed(std::optional<std::uint64_t> flag, const json& config) {
  if (flag) return *flag;
  if (const char* env = std::getenv("MSB_SEED"); env && *env) return parse_seed(env);
  if (config.is_object() && config.contains("seed")) return read_size(config, "seed");
  return 0;
}

}  // namespace msb
