#pragma once

#include <chrono>
#include <map>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

namespace provhunt {

struct CompletionParams {
  std::string model = "gpt-3.5-turbo";
  double temperature = 0.0;
};

/// A chat-completion service. Implementations must be safe to call from
/// several threads at once.
class LlmBackend {
 public:
  virtual ~LlmBackend() = default;

  /// Throws Error(BackendUnavailable) or Error(Timeout).
  virtual std::string complete(const std::string& prompt, const CompletionParams& params) = 0;
};

/// Key used by session recordings.
std::string prompt_hash(std::string_view prompt);

/// Answers "malicious" iff any query-path line of the prompt ("Q<n>: ...")
/// contains one of the indicator strings, "benign" otherwise.
class MockBackend final : public LlmBackend {
 public:
  explicit MockBackend(std::vector<std::string> iocs) : iocs_(std::move(iocs)) {}

  std::string complete(const std::string& prompt, const CompletionParams& params) override;

  /// The rule applied directly to a list of path sentences.
  bool flags(const std::vector<std::string>& query_paths) const;

 private:
  std::vector<std::string> iocs_;
};

/// Serves responses from a recorded session: a JSON array of
/// {"prompt_hash": <sha256 hex>, "response": <text>}.
class ReplayBackend final : public LlmBackend {
 public:
  explicit ReplayBackend(const std::string& session_path);

  std::string complete(const std::string& prompt, const CompletionParams& params) override;

 private:
  std::map<std::string, std::string> responses_;
};

/// Forwards to another backend and remembers every exchange.
class RecordingBackend final : public LlmBackend {
 public:
  explicit RecordingBackend(LlmBackend& inner) : inner_(inner) {}

  std::string complete(const std::string& prompt, const CompletionParams& params) override;

  /// Writes the session sorted by prompt hash.
  void save(const std::string& path) const;

 private:
  LlmBackend& inner_;
  mutable std::mutex mu_;
  std::map<std::string, std::string> responses_;
};

struct HttpBackendConfig {
  /// Full URL of the chat-completions route, e.g.
  /// https://api.openai.com/v1/chat/completions
  std::string endpoint;
  std::string api_key;
  int max_retries = 3;
  std::chrono::milliseconds initial_backoff{500};
  std::chrono::seconds timeout{60};
};

/// Speaks the common chat-completion wire format: POST {model, messages,
/// temperature}; reads choices[0].message.content. Transport failures, 429
/// and 5xx are retried with exponential backoff.
class HttpChatBackend final : public LlmBackend {
 public:
  explicit HttpChatBackend(HttpBackendConfig config);

  std::string complete(const std::string& prompt, const CompletionParams& params) override;

 private:
  HttpBackendConfig config_;
  std::string origin_;  // scheme://host[:port]
  std::string path_;
};

}  // namespace provhunt
