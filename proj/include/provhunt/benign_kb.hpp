#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "provhunt/embedder.hpp"
#include "provhunt/types.hpp"

namespace provhunt {

struct FreqKey {
  std::string src;
  std::string dst;
  EventType type = EventType::Read;

  auto operator<=>(const FreqKey&) const = default;
};

/// Name-keyed event frequencies of attack-free behaviour. Counts are weighted
/// by each compressed edge's merged-event count.
struct BehaviorStats {
  std::map<FreqKey, std::uint64_t> total_freq;
  std::map<std::string, std::uint64_t, std::less<>> out_total;
  std::map<std::string, std::uint64_t, std::less<>> in_total;
  std::uint64_t grand_out = 0;
  std::uint64_t grand_in = 0;

  void add(const std::string& src, const std::string& dst, EventType type, std::uint64_t count);

  std::uint64_t freq(const std::string& src, const std::string& dst, EventType type) const;
  std::uint64_t out_of(std::string_view name) const;
  std::uint64_t in_of(std::string_view name) const;

  /// Every name seen as a source or destination.
  std::set<std::string> names() const;

  friend bool operator==(const BehaviorStats&, const BehaviorStats&) = default;
};

BehaviorStats accumulate(std::span<const CompressedEdge> edges);

/// Benign store: statistics plus the name embedder used to build them.
struct BenignKb {
  BehaviorStats stats;
  Embedder embedder = Embedder::hashed();

  friend bool operator==(const BenignKb&, const BenignKb&) = default;
};

/// One sentence per distinct entity name, tokenized.
std::vector<std::vector<std::string>> name_corpus(std::span<const CompressedEdge> edges);

/// JSON container with sections meta, token_vectors, total_freq, out_total,
/// in_total. Throws Error(IoFailure).
void save_benign_kb(const BenignKb& kb, const std::string& path);
/// Throws Error(IoFailure) or Error(SchemaMismatch).
BenignKb load_benign_kb(const std::string& path);

inline constexpr std::string_view kBenignKbFormat = "provhunt-benign-kb";
inline constexpr int kBenignKbVersion = 1;

}  // namespace provhunt
