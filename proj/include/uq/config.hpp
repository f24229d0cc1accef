#pragma once

#include <string>

#include "json.hpp"
#include "uq/harness.hpp"

namespace uq::config {

// Parses a config file into a JSON document; ParseError on bad syntax.
nlohmann::json load_config_file(const std::string& path);

// Builds the executable suite from a self-contained config document:
// generators, data specs, ODD, criteria, test cases, trees, and the
// estimator (trained inline or loaded from checkpoints). Relative paths
// resolve against base_dir. Throws ConfigError/ParseError on any defect;
// nothing executes on an invalid config.
harness::Suite load_suite(const nlohmann::json& doc, const std::string& base_dir);

// Parses only the `generators` section; enough for dataset generation.
std::map<std::string, synth::Generator> parse_generators(const nlohmann::json& doc);

// Dataset generation requests of the `gen` section.
struct GenRequest {
  std::string generator;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  std::string file;
};
std::vector<GenRequest> parse_gen_requests(const nlohmann::json& doc);

// Stable digest over the config with timing-irrelevant normalization
// (parallelism degree removed; keys sorted).
std::string config_digest(const nlohmann::json& doc);

}  // namespace uq::config
