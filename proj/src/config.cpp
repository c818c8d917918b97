#include "provhunt/config.hpp"

#include <fmt/format.h>

#include <cstdlib>
#include <fstream>
#include <map>
#include <variant>

namespace provhunt {

namespace {

using Field = std::variant<int RunConfig::*, double RunConfig::*, std::size_t RunConfig::*,
                           std::string RunConfig::*, bool RunConfig::*, Timestamp RunConfig::*>;

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table{
      {"k1", &RunConfig::k1},
      {"k2", &RunConfig::k2},
      {"top_k", &RunConfig::top_k},
      {"tau", &RunConfig::tau},
      {"beam_width", &RunConfig::beam_width},
      {"token_budget", &RunConfig::token_budget},
      {"embedder", &RunConfig::embedder},
      {"tolerance", &RunConfig::tolerance},
      {"backend", &RunConfig::backend},
      {"session", &RunConfig::session},
      {"endpoint", &RunConfig::endpoint},
      {"model", &RunConfig::model},
      {"temperature", &RunConfig::temperature},
      {"max_in_flight", &RunConfig::max_in_flight},
      {"iocs_file", &RunConfig::iocs_file},
      {"prompt_template", &RunConfig::prompt_template},
      {"keywords_file", &RunConfig::keywords_file},
      {"all_clusters", &RunConfig::all_clusters},
      {"input", &RunConfig::input},
      {"benign_kb", &RunConfig::benign_kb},
      {"cti_kb", &RunConfig::cti_kb},
      {"truth", &RunConfig::truth},
      {"run_dir", &RunConfig::run_dir},
  };
  return table;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& what) {
  throw Error(ErrorCode::Config, fmt::format("config key '{}': {}", key, what));
}

template <typename T>
T integer_from(const nlohmann::json& v, const std::string& key) {
  if (!v.is_number_integer()) bad_value(key, "expected an integer");
  if constexpr (std::is_unsigned_v<T>) {
    if (v.get<long long>() < 0) bad_value(key, "must not be negative");
  }
  return v.get<T>();
}

void set_from_json(RunConfig& c, const std::string& key, const Field& field, const nlohmann::json& v) {
  std::visit(
      [&](auto member) {
        using T = std::remove_reference_t<decltype(c.*member)>;
        if constexpr (std::is_same_v<T, std::string>) {
          if (!v.is_string()) bad_value(key, "expected a string");
          c.*member = v.get<std::string>();
        } else if constexpr (std::is_same_v<T, bool>) {
          if (!v.is_boolean()) bad_value(key, "expected true or false");
          c.*member = v.get<bool>();
        } else if constexpr (std::is_same_v<T, double>) {
          if (!v.is_number()) bad_value(key, "expected a number");
          c.*member = v.get<double>();
        } else {
          c.*member = integer_from<T>(v, key);
        }
      },
      field);
}

nlohmann::json json_from_env(const std::string& key, const Field& field, const std::string& text) {
  if (std::holds_alternative<std::string RunConfig::*>(field)) return text;
  if (std::holds_alternative<bool RunConfig::*>(field)) {
    if (text == "1" || text == "true") return true;
    if (text == "0" || text == "false") return false;
    bad_value(key, fmt::format("cannot read '{}' as a boolean", text));
  }
  try {
    auto v = nlohmann::json::parse(text);
    if (!v.is_number()) bad_value(key, fmt::format("cannot read '{}' as a number", text));
    return v;
  } catch (const nlohmann::json::exception&) {
    bad_value(key, fmt::format("cannot read '{}' as a number", text));
  }
}

std::string env_name(const std::string& key) {
  std::string out = "PROVHUNT_";
  for (char ch : key) out += static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  return out;
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> out;
    for (const auto& [k, _] : fields()) out.push_back(k);
    return out;
  }();
  return keys;
}

void apply_json(RunConfig& config, const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::Config, "config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    auto it = fields().find(key);
    if (it == fields().end()) throw Error(ErrorCode::Config, fmt::format("unknown config key '{}'", key));
    set_from_json(config, key, it->second, value);
  }
}

void apply_config_file(RunConfig& config, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Config, fmt::format("cannot open config file '{}'", path));
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Config, fmt::format("config file '{}': {}", path, e.what()));
  }
  apply_json(config, j);
}

std::optional<std::string> process_env(const std::string& name) {
  if (const char* v = std::getenv(name.c_str())) return std::string(v);
  return std::nullopt;
}

void apply_env(RunConfig& config, const EnvLookup& env) {
  for (const auto& [key, field] : fields()) {
    if (auto v = env(env_name(key))) set_from_json(config, key, field, json_from_env(key, field, *v));
  }
  if (auto key = env("PROVHUNT_API_KEY")) {
    config.api_key = *key;
  } else if (auto fallback = env("OPENAI_API_KEY")) {
    config.api_key = *fallback;
  }
}

void validate(const RunConfig& c) {
  auto require = [](bool ok, std::string_view what) {
    if (!ok) throw Error(ErrorCode::Config, std::string(what));
  };
  require(c.k1 >= 1, "k1 must be >= 1");
  require(c.k2 >= 1, "k2 must be >= 1");
  require(c.top_k >= 1, "top_k must be >= 1");
  require(c.beam_width >= 1, "beam_width must be >= 1");
  require(c.token_budget >= 1, "token_budget must be >= 1");
  require(c.max_in_flight >= 1, "max_in_flight must be >= 1");
  require(c.tau >= -1.0 && c.tau <= 1.0, "tau must lie in [-1, 1]");
  require(c.temperature >= 0.0, "temperature must be >= 0");
  require(c.tolerance >= 0, "tolerance must be >= 0");
  require(c.backend == "mock" || c.backend == "replay" || c.backend == "http",
          "backend must be one of mock, replay, http");
  require(c.embedder == "hashed" || c.embedder == "trained", "embedder must be hashed or trained");
  require(c.backend != "replay" || !c.session.empty(), "replay backend needs a session file");
  require(c.backend != "http" || !c.endpoint.empty(), "http backend needs an endpoint");
}

nlohmann::ordered_json detection_params(const RunConfig& c) {
  nlohmann::ordered_json j;
  j["k1"] = c.k1;
  j["k2"] = c.k2;
  j["top_k"] = c.top_k;
  j["tau"] = c.tau;
  j["beam_width"] = c.beam_width;
  j["token_budget"] = c.token_budget;
  j["backend"] = c.backend;
  j["model"] = c.model;
  j["temperature"] = c.temperature;
  return j;
}

int exit_code_for(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::Config: return 2;
    case ErrorCode::BackendUnavailable:
    case ErrorCode::Timeout: return 4;
    case ErrorCode::NoViableCluster: return 5;
    default: return 3;
  }
}

}  // namespace provhunt
