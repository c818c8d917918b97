#include "provhunt/embedder.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <random>
#include <unordered_map>

#include "provhunt/errors.hpp"
#include "provhunt/hashing.hpp"

namespace provhunt {

namespace {

bool all_digits(std::string_view s) {
  return !s.empty() &&
         std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isdigit(c); });
}

void normalize(Vector& v) {
  double norm = 0.0;
  for (float x : v) norm += static_cast<double>(x) * x;
  norm = std::sqrt(norm);
  if (norm == 0.0) return;
  for (float& x : v) x = static_cast<float>(x / norm);
}

bool is_zero(const Vector& v) {
  return std::all_of(v.begin(), v.end(), [](float x) { return x == 0.0f; });
}

Vector reserved_direction(int dim) {
  return Vector(static_cast<std::size_t>(dim), static_cast<float>(1.0 / std::sqrt(dim)));
}

/// Sampling table for negatives, unigram counts raised to 0.75.
class NegativeTable {
 public:
  explicit NegativeTable(const std::vector<std::uint64_t>& counts) {
    double total = 0.0;
    for (auto c : counts) total += std::pow(static_cast<double>(c), 0.75);
    const std::size_t size = std::max<std::size_t>(1024, counts.size() * 64);
    table_.reserve(size);
    double cumulative = 0.0;
    std::size_t word = 0;
    for (std::size_t i = 0; i < size; ++i) {
      while (word + 1 < counts.size() &&
             (i + 0.5) / static_cast<double>(size) >
                 (cumulative + std::pow(static_cast<double>(counts[word]), 0.75)) / total) {
        cumulative += std::pow(static_cast<double>(counts[word]), 0.75);
        ++word;
      }
      table_.push_back(static_cast<std::uint32_t>(word));
    }
  }

  std::uint32_t sample(std::mt19937_64& rng) const { return table_[rng() % table_.size()]; }

 private:
  std::vector<std::uint32_t> table_;
};

}  // namespace

std::vector<std::string> tokenize(std::string_view name) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (current.empty()) return;
    tokens.push_back(all_digits(current) ? std::string(kNumToken) : current);
    current.clear();
  };
  for (std::size_t i = 0; i < name.size(); ++i) {
    const char c = name[i];
    if (c == '-' && i + 1 < name.size() && name[i + 1] == '>') {
      flush();
      ++i;
    } else if (c == '/' || c == ':' || c == '.' ||
               std::isspace(static_cast<unsigned char>(c))) {
      flush();
    } else {
      current += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
  }
  flush();
  return tokens;
}

std::string_view to_string(EmbedderMode mode) noexcept {
  return mode == EmbedderMode::Hashed ? "hashed" : "trained";
}

double cosine(std::span<const float> a, std::span<const float> b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  const std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

Vector hashed_token_vector(std::string_view token, int dim) {
  Vector v(static_cast<std::size_t>(dim), 0.0f);
  std::uint64_t h = fnv1a64(token);
  for (int probe = 0; probe < 4; ++probe) {
    h = fnv1a64(token, h ^ (0x9e3779b97f4a7c15ULL * (probe + 1)));
    const auto bucket = static_cast<std::size_t>(h % static_cast<std::uint64_t>(dim));
    v[bucket] += (h >> 63) ? 1.0f : -1.0f;
  }
  if (is_zero(v)) return reserved_direction(dim);
  normalize(v);
  return v;
}

Embedder Embedder::hashed(int dim) {
  if (dim < 1) throw Error(ErrorCode::Config, "embedding dimension must be >= 1");
  return Embedder(dim, EmbedderMode::Hashed);
}

Embedder Embedder::train(std::span<const std::vector<std::string>> corpus,
                         const TrainerOptions& options) {
  if (options.dim < 1 || options.window < 1 || options.negatives < 0 || options.epochs < 1)
    throw Error(ErrorCode::Config, "invalid trainer options");

  std::map<std::string, std::uint64_t> counts;
  std::size_t total_tokens = 0;
  for (const auto& sentence : corpus) {
    for (const auto& tok : sentence) ++counts[tok];
    total_tokens += sentence.size();
  }
  if (counts.empty()) throw Error(ErrorCode::EmptyCorpus, "training corpus has no tokens");

  std::unordered_map<std::string, std::uint32_t> index;
  std::vector<std::string> words;
  std::vector<std::uint64_t> freq;
  for (const auto& [tok, c] : counts) {
    index.emplace(tok, static_cast<std::uint32_t>(words.size()));
    words.push_back(tok);
    freq.push_back(c);
  }

  const auto d = static_cast<std::size_t>(options.dim);
  std::mt19937_64 rng(options.seed);
  auto uniform = [&rng] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };

  std::vector<float> syn0(words.size() * d);
  std::vector<float> syn1(words.size() * d, 0.0f);
  for (auto& x : syn0) x = static_cast<float>((uniform() - 0.5) / options.dim);

  NegativeTable table(freq);
  std::vector<float> grad(d);
  const double total_steps = static_cast<double>(options.epochs) * total_tokens;
  double step = 0.0;

  auto update = [&](std::uint32_t input, std::uint32_t output, float label, double lr) {
    float* in = &syn0[input * d];
    float* out = &syn1[output * d];
    double dot = 0.0;
    for (std::size_t k = 0; k < d; ++k) dot += static_cast<double>(in[k]) * out[k];
    dot = std::clamp(dot, -6.0, 6.0);
    const double g = (label - 1.0 / (1.0 + std::exp(-dot))) * lr;
    for (std::size_t k = 0; k < d; ++k) {
      grad[k] += static_cast<float>(g * out[k]);
      out[k] += static_cast<float>(g * in[k]);
    }
  };

  std::vector<std::uint32_t> ids;
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    for (const auto& sentence : corpus) {
      ids.clear();
      for (const auto& tok : sentence) ids.push_back(index.at(tok));
      for (std::size_t i = 0; i < ids.size(); ++i, step += 1.0) {
        const double lr =
            std::max(options.learning_rate * (1.0 - step / (total_steps + 1.0)),
                     options.learning_rate * 1e-4);
        const std::size_t lo = i >= static_cast<std::size_t>(options.window) ? i - options.window : 0;
        const std::size_t hi = std::min(ids.size() - 1, i + options.window);
        for (std::size_t j = lo; j <= hi; ++j) {
          if (j == i) continue;
          // Context word predicts the centre word, as in word2vec's skip-gram loop.
          const std::uint32_t context = ids[j];
          std::fill(grad.begin(), grad.end(), 0.0f);
          update(context, ids[i], 1.0f, lr);
          for (int n = 0; n < options.negatives; ++n) {
            const std::uint32_t neg = table.sample(rng);
            if (neg == ids[i]) continue;
            update(context, neg, 0.0f, lr);
          }
          float* in = &syn0[context * d];
          for (std::size_t k = 0; k < d; ++k) in[k] += grad[k];
        }
      }
    }
  }

  Embedder e(options.dim, EmbedderMode::Trained);
  for (std::size_t w = 0; w < words.size(); ++w) {
    Vector v(syn0.begin() + static_cast<std::ptrdiff_t>(w * d),
             syn0.begin() + static_cast<std::ptrdiff_t>((w + 1) * d));
    if (is_zero(v)) v = hashed_token_vector(words[w], options.dim);
    normalize(v);
    e.vectors_.emplace(words[w], std::move(v));
  }
  return e;
}

Vector Embedder::token_vector(std::string_view token) const {
  if (auto it = vectors_.find(token); it != vectors_.end()) return it->second;
  return hashed_token_vector(token, dim_);
}

Vector Embedder::embed_tokens(std::span<const std::string> tokens) const {
  if (tokens.empty()) return reserved_direction(dim_);
  Vector sum(static_cast<std::size_t>(dim_), 0.0f);
  std::vector<double> acc(static_cast<std::size_t>(dim_), 0.0);
  for (const auto& tok : tokens) {
    const Vector v = token_vector(tok);
    for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += v[k];
  }
  for (std::size_t k = 0; k < acc.size(); ++k)
    sum[k] = static_cast<float>(acc[k] / static_cast<double>(tokens.size()));
  if (is_zero(sum)) return reserved_direction(dim_);
  normalize(sum);
  return sum;
}

nlohmann::json Embedder::to_json() const {
  nlohmann::json j;
  j["mode"] = std::string(to_string(mode_));
  j["dim"] = dim_;
  nlohmann::json vectors = nlohmann::json::object();
  for (const auto& [tok, v] : vectors_) vectors[tok] = v;
  j["token_vectors"] = std::move(vectors);
  return j;
}

Embedder Embedder::from_json(const nlohmann::json& j) {
  try {
    const auto mode_text = j.at("mode").get<std::string>();
    EmbedderMode mode;
    if (mode_text == "hashed") {
      mode = EmbedderMode::Hashed;
    } else if (mode_text == "trained") {
      mode = EmbedderMode::Trained;
    } else {
      throw Error(ErrorCode::SchemaMismatch, fmt::format("unknown embedder mode '{}'", mode_text));
    }
    const int dim = j.at("dim").get<int>();
    if (dim < 1) throw Error(ErrorCode::SchemaMismatch, "embedder dimension must be >= 1");
    Embedder e(dim, mode);
    for (const auto& [tok, v] : j.at("token_vectors").items()) {
      auto vec = v.get<Vector>();
      if (vec.size() != static_cast<std::size_t>(dim))
        throw Error(ErrorCode::SchemaMismatch,
                    fmt::format("token '{}' has dimension {}, expected {}", tok, vec.size(), dim));
      e.vectors_.emplace(tok, std::move(vec));
    }
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::SchemaMismatch, fmt::format("embedder section: {}", ex.what()));
  }
}

}  // namespace provhunt
