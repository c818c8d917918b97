#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "provhunt/cti_kb.hpp"
#include "provhunt/embedder.hpp"
#include "provhunt/llm_backend.hpp"

namespace provhunt {

struct Retrieved {
  Label label = Label::Benign;
  std::string sentence;
  double similarity = 0.0;
};

struct PromptBundle {
  std::string anchor;       // uuid
  std::string anchor_name;
  std::vector<std::string> query_paths;
  std::vector<Retrieved> retrieved;  // similarity descending
  std::string rendered;
  std::size_t token_estimate = 0;
  bool truncated = false;  // retrieved items were dropped to fit the budget
};

/// Prompt text with placeholders {{anchor_uuid}}, {{anchor_name}},
/// {{rare_paths}}, {{benign_knowledge}} and {{malicious_knowledge}}.
class PromptTemplate {
 public:
  static PromptTemplate builtin();
  /// Throws Error(IoFailure), or Error(Config) if a placeholder is missing.
  static PromptTemplate from_file(const std::string& path);
  explicit PromptTemplate(std::string text);

  std::string render(const PromptBundle& bundle) const;
  const std::string& text() const noexcept { return text_; }

 private:
  std::string text_;
};

struct PromptOptions {
  std::size_t top_k = 5;
  std::size_t token_budget = 4096;
};

/// Rough token count: one token per four bytes, rounded up.
std::size_t estimate_tokens(std::string_view text) noexcept;

/// Retrieves the top-k benign and top-k malicious entries for every query
/// path, de-duplicates them and renders the prompt. If the result is over
/// budget, retrieved items are dropped lowest-similarity first; query paths
/// are never dropped. An empty index renders "none found" placeholders.
PromptBundle build_prompt(std::string anchor, std::string anchor_name,
                          std::vector<std::string> query_paths, const VectorIndex& index,
                          const Embedder& embedder, const PromptOptions& options = {},
                          const PromptTemplate& tmpl = PromptTemplate::builtin());

struct Verdict {
  std::string anchor;
  Label label = Label::Benign;
  std::string raw_response;
  int retries_used = 0;
  bool unparseable = false;
};

/// Earliest case-insensitive occurrence of "malicious" or "benign".
std::optional<Label> parse_verdict(std::string_view response);

/// Appended to the prompt when the first answer could not be parsed.
inline constexpr std::string_view kStrictRetryInstruction =
    "\n\nYour previous reply could not be read. Reply with one word only: benign or malicious.";

/// One retry on an unparseable reply; a second failure yields benign with the
/// unparseable flag set.
Verdict judge(const PromptBundle& bundle, LlmBackend& backend, const CompletionParams& params);

/// Judges bundles with at most `max_in_flight` concurrent requests. Results
/// are returned in input order. The first backend error is rethrown after all
/// workers stop.
std::vector<Verdict> judge_all(std::span<const PromptBundle> bundles, LlmBackend& backend,
                               const CompletionParams& params, std::size_t max_in_flight);

}  // namespace provhunt
