#include "provhunt/llm_backend.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <cctype>
#include <fstream>
#include <httplib.h>
#include <json.hpp>
#include <sstream>
#include <thread>

#include "provhunt/errors.hpp"
#include "provhunt/hashing.hpp"

namespace provhunt {

namespace {

bool is_query_line(std::string_view line) {
  std::size_t i = 0;
  while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
  if (i >= line.size() || line[i] != 'Q') return false;
  std::size_t j = i + 1;
  while (j < line.size() && std::isdigit(static_cast<unsigned char>(line[j]))) ++j;
  return j > i + 1 && j < line.size() && line[j] == ':';
}

bool contains_any(std::string_view text, const std::vector<std::string>& needles) {
  for (const auto& n : needles)
    if (!n.empty() && text.find(n) != std::string_view::npos) return true;
  return false;
}

}  // namespace

std::string prompt_hash(std::string_view prompt) { return sha256_hex(prompt); }

std::string MockBackend::complete(const std::string& prompt, const CompletionParams&) {
  std::istringstream in(prompt);
  std::string line;
  while (std::getline(in, line)) {
    if (is_query_line(line) && contains_any(line, iocs_)) return "malicious";
  }
  return "benign";
}

bool MockBackend::flags(const std::vector<std::string>& query_paths) const {
  for (const auto& p : query_paths)
    if (contains_any(p, iocs_)) return true;
  return false;
}

ReplayBackend::ReplayBackend(const std::string& session_path) {
  std::ifstream in(session_path, std::ios::binary);
  if (!in)
    throw Error(ErrorCode::IoFailure, fmt::format("cannot open session '{}'", session_path));
  try {
    const auto j = nlohmann::json::parse(in);
    for (const auto& row : j)
      responses_[row.at("prompt_hash").get<std::string>()] = row.at("response").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaMismatch,
                fmt::format("session '{}' is malformed: {}", session_path, e.what()));
  }
}

std::string ReplayBackend::complete(const std::string& prompt, const CompletionParams&) {
  const auto hash = prompt_hash(prompt);
  auto it = responses_.find(hash);
  if (it == responses_.end())
    throw Error(ErrorCode::BackendUnavailable,
                fmt::format("no recorded response for prompt {}", hash.substr(0, 16)));
  return it->second;
}

std::string RecordingBackend::complete(const std::string& prompt, const CompletionParams& params) {
  std::string response = inner_.complete(prompt, params);
  std::lock_guard lock(mu_);
  responses_[prompt_hash(prompt)] = response;
  return response;
}

void RecordingBackend::save(const std::string& path) const {
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  {
    std::lock_guard lock(mu_);
    for (const auto& [hash, response] : responses_)
      j.push_back({{"prompt_hash", hash}, {"response", response}});
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, fmt::format("cannot write '{}'", path));
  out << j.dump(1) << '\n';
}

HttpChatBackend::HttpChatBackend(HttpBackendConfig config) : config_(std::move(config)) {
  const auto scheme_end = config_.endpoint.find("://");
  if (scheme_end == std::string::npos)
    throw Error(ErrorCode::Config, fmt::format("endpoint '{}' has no scheme", config_.endpoint));
  const auto path_start = config_.endpoint.find('/', scheme_end + 3);
  origin_ = config_.endpoint.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/" : config_.endpoint.substr(path_start);
}

std::string HttpChatBackend::complete(const std::string& prompt, const CompletionParams& params) {
  nlohmann::ordered_json body;
  body["model"] = params.model;
  body["messages"] = nlohmann::ordered_json::array({{{"role", "user"}, {"content", prompt}}});
  body["temperature"] = params.temperature;
  const std::string payload = body.dump();

  httplib::Client client(origin_);
  client.set_connection_timeout(config_.timeout);
  client.set_read_timeout(config_.timeout);
  client.set_write_timeout(config_.timeout);
  httplib::Headers headers;
  if (!config_.api_key.empty())
    headers.emplace("Authorization", "Bearer " + config_.api_key);

  auto backoff = config_.initial_backoff;
  std::string last_error;
  bool timed_out = false;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) {
      spdlog::warn("chat backend attempt {} failed ({}); retrying in {} ms", attempt, last_error,
                   backoff.count());
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
    auto res = client.Post(path_, headers, payload, "application/json");
    if (!res) {
      const auto err = res.error();
      timed_out = err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read;
      last_error = httplib::to_string(err);
      continue;
    }
    timed_out = false;
    if (res->status == 429 || res->status >= 500) {
      last_error = fmt::format("HTTP {}", res->status);
      continue;
    }
    if (res->status != 200)
      throw Error(ErrorCode::BackendUnavailable,
                  fmt::format("chat backend returned HTTP {}: {}", res->status, res->body));
    try {
      const auto j = nlohmann::json::parse(res->body);
      return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::BackendUnavailable,
                  fmt::format("unexpected chat backend response: {}", e.what()));
    }
  }
  throw Error(timed_out ? ErrorCode::Timeout : ErrorCode::BackendUnavailable,
              fmt::format("chat backend at {} failed after {} retries: {}", origin_,
                          config_.max_retries, last_error));
}

}  // namespace provhunt
