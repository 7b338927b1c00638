#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "msb/report.hpp"

namespace msb {

/// Overlays the keys present in `doc` onto the target. Unknown keys and
/// wrongly typed values throw ConfigError.
void apply_json(const json& doc, ModelConfig& c);
void apply_json(const json& doc, SineDatasetSpec& s);
void apply_json(const json& doc, TrainConfig& t);
void apply_json(const json& doc, VerifyConfig& v);

/// Reads a JSON config file; throws ConfigError if missing or malformed.
json load_config(const std::string& path);

/// Throws ConfigError unless `doc` only has keys among
/// seed, model, dataset, train, verify, scaling.
void check_config_keys(const json& doc);

/// Parses a decimal seed; throws ConfigError on anything else.
std::uint64_t parse_seed(const std::string& text);

/// flag > MSB_SEED > config "seed" > 0.
std::uint64_t resolve_seed(std::optional<std::uint64_t> flag, const json& config);

}  // namespace msb
