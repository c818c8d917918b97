#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace provhunt {

inline constexpr std::string_view kNumToken = "<NUM>";

/// Splits a path or socket name into words on '/', ':', '->' and '.',
/// lowercases them and replaces all-digit words with <NUM>.
std::vector<std::string> tokenize(std::string_view name);

enum class EmbedderMode { Hashed, Trained };

std::string_view to_string(EmbedderMode mode) noexcept;

struct TrainerOptions {
  int dim = 64;
  int window = 2;
  int negatives = 5;
  int epochs = 5;
  double learning_rate = 0.025;
  std::uint64_t seed = 1;
};

using Vector = std::vector<float>;

/// Cosine of two equal-length vectors, computed in double. 0 if either is zero.
double cosine(std::span<const float> a, std::span<const float> b);

/// Maps token sequences to unit vectors. A sequence embeds as the mean of its
/// token vectors, L2-normalized. Trained mode looks tokens up in a
/// skip-gram table and falls back to feature hashing for unknown tokens.
class Embedder {
 public:
  static constexpr int kDefaultDim = 64;

  static Embedder hashed(int dim = kDefaultDim);
  /// Skip-gram with negative sampling over the given token sentences.
  /// Throws Error(EmptyCorpus) when there is nothing to learn from.
  static Embedder train(std::span<const std::vector<std::string>> corpus,
                        const TrainerOptions& options = {});

  int dim() const noexcept { return dim_; }
  EmbedderMode mode() const noexcept { return mode_; }
  const std::map<std::string, Vector, std::less<>>& vocabulary() const noexcept {
    return vectors_;
  }

  /// Unit vector for one token.
  Vector token_vector(std::string_view token) const;
  /// Unit vector; empty input maps to a reserved constant direction.
  Vector embed_tokens(std::span<const std::string> tokens) const;
  Vector embed(std::string_view name) const { return embed_tokens(tokenize(name)); }

  nlohmann::json to_json() const;
  /// Throws Error(SchemaMismatch).
  static Embedder from_json(const nlohmann::json& j);

  friend bool operator==(const Embedder&, const Embedder&) = default;

 private:
  Embedder(int dim, EmbedderMode mode) : dim_(dim), mode_(mode) {}

  int dim_;
  EmbedderMode mode_;
  std::map<std::string, Vector, std::less<>> vectors_;
};

/// Feature-hashed token vector: four signed probes into `dim` buckets.
Vector hashed_token_vector(std::string_view token, int dim);

}  // namespace provhunt
