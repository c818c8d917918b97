#include "provhunt/benign_kb.hpp"

#include <fmt/format.h>

#include <fstream>
#include <algorithm>

#include "provhunt/errors.hpp"

namespace provhunt {

namespace {

template <typename Map>
std::uint64_t lookup(const Map& m, std::string_view key) {
  auto it = m.find(key);
  return it == m.end() ? 0 : it->second;
}

[[noreturn]] void mismatch(const std::string& why) {
  throw Error(ErrorCode::SchemaMismatch, why);
}

}  // namespace

void BehaviorStats::add(const std::string& src, const std::string& dst, EventType type,
                        std::uint64_t count) {
  total_freq[FreqKey{src, dst, type}] += count;
  out_total[src] += count;
  in_total[dst] += count;
  grand_out += count;
  grand_in += count;
}

std::uint64_t BehaviorStats::freq(const std::string& src, const std::string& dst,
                                  EventType type) const {
  auto it = total_freq.find(FreqKey{src, dst, type});
  return it == total_freq.end() ? 0 : it->second;
}

std::uint64_t BehaviorStats::out_of(std::string_view name) const { return lookup(out_total, name); }
std::uint64_t BehaviorStats::in_of(std::string_view name) const { return lookup(in_total, name); }

std::set<std::string> BehaviorStats::names() const {
  std::set<std::string> out;
  for (const auto& [n, _] : out_total) out.insert(n);
  for (const auto& [n, _] : in_total) out.insert(n);
  return out;
}

BehaviorStats accumulate(std::span<const CompressedEdge> edges) {
  BehaviorStats stats;
  for (const auto& e : edges) stats.add(e.subject.name, e.object.name, e.type, e.count);
  return stats;
}

std::vector<std::vector<std::string>> name_corpus(std::span<const CompressedEdge> edges) {
  std::set<std::string> names;
  for (const auto& e : edges) {
    names.insert(e.subject.name);
    names.insert(e.object.name);
  }
  std::vector<std::vector<std::string>> corpus;
  for (const auto& n : names) {
    auto toks = tokenize(n);
    if (!toks.empty()) corpus.push_back(std::move(toks));
  }
  return corpus;
}

void save_benign_kb(const BenignKb& kb, const std::string& path) {
  nlohmann::ordered_json j;
  j["meta"] = {{"format", kBenignKbFormat},
               {"version", kBenignKbVersion},
               {"embedder", std::string(to_string(kb.embedder.mode()))},
               {"dim", kb.embedder.dim()},
               {"grand_out", kb.stats.grand_out},
               {"grand_in", kb.stats.grand_in}};
  j["token_vectors"] = kb.embedder.vocabulary();
  auto freq = nlohmann::ordered_json::array();
  for (const auto& [k, c] : kb.stats.total_freq)
    freq.push_back({k.src, k.dst, std::string(to_string(k.type)), c});
  j["total_freq"] = std::move(freq);
  j["out_total"] = kb.stats.out_total;
  j["in_total"] = kb.stats.in_total;

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, fmt::format("cannot write '{}'", path));
  out << j.dump(1) << '\n';
  if (!out) throw Error(ErrorCode::IoFailure, fmt::format("write failed: '{}'", path));
}

BenignKb load_benign_kb(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, fmt::format("cannot open '{}'", path));
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    mismatch(fmt::format("'{}' is not JSON: {}", path, e.what()));
  }
  try {
    const auto& meta = j.at("meta");
    if (meta.at("format").get<std::string>() != kBenignKbFormat)
      mismatch(fmt::format("'{}' is not a benign KB", path));
    if (meta.at("version").get<int>() != kBenignKbVersion)
      mismatch(fmt::format("'{}' has KB version {}, expected {}", path,
                           meta.at("version").get<int>(), kBenignKbVersion));
    const nlohmann::json embedder{{"mode", meta.at("embedder")},
                                  {"dim", meta.at("dim")},
                                  {"token_vectors", j.at("token_vectors")}};
    BenignKb kb{BehaviorStats{}, Embedder::from_json(embedder)};
    for (const auto& row : j.at("total_freq")) {
      auto type = parse_event_type(row.at(2).get<std::string>());
      if (!type) mismatch(fmt::format("unknown event type in total_freq: {}", row.dump()));
      kb.stats.add(row.at(0).get<std::string>(), row.at(1).get<std::string>(), *type,
                   row.at(3).get<std::uint64_t>());
    }
    // Aggregates are rebuilt from total_freq; the stored copies must agree.
    const auto out_total = j.at("out_total").get<std::map<std::string, std::uint64_t>>();
    const auto in_total = j.at("in_total").get<std::map<std::string, std::uint64_t>>();
    if (!std::equal(out_total.begin(), out_total.end(), kb.stats.out_total.begin(),
                    kb.stats.out_total.end()) ||
        !std::equal(in_total.begin(), in_total.end(), kb.stats.in_total.begin(),
                    kb.stats.in_total.end()) ||
        meta.at("grand_out").get<std::uint64_t>() != kb.stats.grand_out ||
        meta.at("grand_in").get<std::uint64_t>() != kb.stats.grand_in)
      mismatch(fmt::format("'{}': degree totals disagree with total_freq", path));
    return kb;
  } catch (const nlohmann::json::exception& e) {
    mismatch(fmt::format("'{}': {}", path, e.what()));
  }
}

}  // namespace provhunt
