#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "provhunt/errors.hpp"
#include "provhunt/types.hpp"

namespace provhunt {

struct RunConfig {
  // detection
  int k1 = 10;
  int k2 = 10;
  int top_k = 5;
  double tau = 0.9;
  int beam_width = 64;
  std::size_t token_budget = 4096;
  std::string embedder = "hashed";  // hashed | trained (build-kb only)
  Timestamp tolerance = 0;

  // judge
  std::string backend = "mock";  // mock | replay | http
  std::string session;           // replay input, or where to record a session
  std::string endpoint = "https://api.openai.com/v1/chat/completions";
  std::string model = "gpt-3.5-turbo";
  std::string api_key;
  double temperature = 0.0;
  std::size_t max_in_flight = 4;
  std::string iocs_file;  // mock backend indicators, one per line
  std::string prompt_template;

  // reconstruction
  std::string keywords_file;
  bool all_clusters = false;

  // paths
  std::string input;
  std::string benign_kb;
  std::string cti_kb;
  std::string truth;
  std::string run_dir = "run";
};

/// Keys accepted in a JSON config file and as PROVHUNT_<KEY> variables.
const std::vector<std::string>& config_keys();

/// Overlays a JSON object. Unknown keys and mistyped values throw
/// Error(Config).
void apply_json(RunConfig& config, const nlohmann::json& j);

/// Reads and overlays a JSON config file.
void apply_config_file(RunConfig& config, const std::string& path);

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

/// The process environment.
std::optional<std::string> process_env(const std::string& name);

/// Overlays PROVHUNT_<KEY> variables. The API key comes from
/// PROVHUNT_API_KEY, falling back to OPENAI_API_KEY.
void apply_env(RunConfig& config, const EnvLookup& env = process_env);

/// Throws Error(Config): counts must be >= 1, tau in [-1, 1], temperature
/// >= 0, tolerance >= 0, known backend and embedder names.
void validate(const RunConfig& config);

/// The knobs that influence detection output, for cache keys and reports.
nlohmann::ordered_json detection_params(const RunConfig& config);

/// Process exit code for an error class: 2 config, 3 input, 4 backend,
/// 5 no attack found.
int exit_code_for(ErrorCode code) noexcept;

}  // namespace provhunt
