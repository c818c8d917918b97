#include "provhunt/cti_kb.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <fstream>

#include "provhunt/errors.hpp"
#include "provhunt/types.hpp"

namespace provhunt {

namespace {

constexpr std::array<std::string_view, 18> kExtraRelations = {
    "open",   "connect", "clone",  "load",   "download", "upload",
    "create", "delete",  "inject", "modify", "exec",     "spawn",
    "unlink", "rename",  "chmod",  "accept", "bind",     "listen"};

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

std::string_view to_string(Label label) noexcept {
  return label == Label::Benign ? "benign" : "malicious";
}

void VectorIndex::add(Vector vector, std::string payload, Label label, std::string source_id) {
  if (vector.size() != static_cast<std::size_t>(dim_))
    throw Error(ErrorCode::Config,
                fmt::format("vector dimension {} does not match index dimension {}",
                            vector.size(), dim_));
  double norm = 0.0;
  for (float x : vector) norm += static_cast<double>(x) * x;
  norm = std::sqrt(norm);
  if (norm == 0.0) throw Error(ErrorCode::Config, "cannot index a zero vector");
  // Already-unit vectors are stored bit-for-bit so persisted indexes reload exactly.
  if (std::abs(norm - 1.0) > 1e-6) {
    for (float& x : vector) x = static_cast<float>(x / norm);
  }
  entries_.push_back({std::move(vector), std::move(payload), label, std::move(source_id)});
}

std::vector<Hit> VectorIndex::query(std::span<const float> vector, std::size_t k,
                                    std::optional<Label> only) const {
  if (entries_.empty()) throw Error(ErrorCode::EmptyIndex, "vector index is empty");
  std::vector<Hit> hits;
  hits.reserve(entries_.size());
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (only && entries_[i].label != *only) continue;
    hits.push_back({i, cosine(vector, entries_[i].vector)});
  }
  const std::size_t n = std::min(k, hits.size());
  std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(n), hits.end(),
                    [](const Hit& a, const Hit& b) {
                      return a.similarity != b.similarity ? a.similarity > b.similarity
                                                          : a.index < b.index;
                    });
  hits.resize(n);
  return hits;
}

bool is_relation_token(std::string_view word) {
  const std::string w = lower(word);
  if (parse_event_type(w)) return true;
  return std::find(kExtraRelations.begin(), kExtraRelations.end(), w) != kExtraRelations.end();
}

std::vector<std::string> split_path_sentence(std::string_view sentence) {
  std::vector<std::string> words;
  std::size_t i = 0;
  while (i < sentence.size()) {
    while (i < sentence.size() && std::isspace(static_cast<unsigned char>(sentence[i]))) ++i;
    std::size_t j = i;
    while (j < sentence.size() && !std::isspace(static_cast<unsigned char>(sentence[j]))) ++j;
    if (j > i) words.emplace_back(sentence.substr(i, j - i));
    i = j;
  }
  if (words.empty()) throw Error(ErrorCode::MalformedPath, "empty path sentence");
  if (words.size() % 2 == 0)
    throw Error(ErrorCode::MalformedPath,
                fmt::format("path has {} words; expected node/relation alternation of odd length",
                            words.size()));
  for (std::size_t w = 0; w < words.size(); ++w) {
    const bool relation = is_relation_token(words[w]);
    if ((w % 2 == 1) != relation) {
      throw Error(ErrorCode::MalformedPath,
                  fmt::format("word {} '{}' should be a {}", w + 1, words[w],
                              w % 2 == 1 ? "relation" : "node"));
    }
  }
  return words;
}

std::vector<std::string> path_tokens(std::string_view sentence) {
  const auto words = split_path_sentence(sentence);
  std::vector<std::string> tokens;
  for (std::size_t w = 0; w < words.size(); ++w) {
    if (w % 2 == 1) {
      tokens.push_back(lower(words[w]));
    } else {
      auto parts = tokenize(words[w]);
      tokens.insert(tokens.end(), parts.begin(), parts.end());
    }
  }
  return tokens;
}

Vector embed_path(const Embedder& embedder, std::string_view sentence) {
  return embedder.embed_tokens(path_tokens(sentence));
}

std::vector<MalPath> read_asg_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, fmt::format("cannot open '{}'", path));
  std::vector<MalPath> paths;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos || line.front() == '#') continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0)
      throw Error(ErrorCode::MalformedPath,
                  fmt::format("{}:{}: expected '<source_id>\\t<sentence>'", path, line_no));
    MalPath p{line.substr(0, tab), line.substr(tab + 1)};
    try {
      split_path_sentence(p.sentence);
    } catch (const Error& e) {
      throw Error(ErrorCode::MalformedPath, fmt::format("{}:{}: {}", path, line_no, e.what()));
    }
    paths.push_back(std::move(p));
  }
  return paths;
}

std::size_t ingest_asg(CtiKb& kb, const std::string& path) {
  const auto paths = read_asg_file(path);
  for (const auto& p : paths)
    kb.index.add(embed_path(kb.embedder, p.sentence), p.sentence, Label::Malicious, p.source_id);
  return paths.size();
}

void save_cti_kb(const CtiKb& kb, const std::string& path) {
  nlohmann::ordered_json j;
  j["meta"] = {{"format", kCtiKbFormat},
               {"version", kCtiKbVersion},
               {"embedder", std::string(to_string(kb.embedder.mode()))},
               {"dim", kb.embedder.dim()}};
  j["token_vectors"] = kb.embedder.vocabulary();
  auto entries = nlohmann::ordered_json::array();
  for (const auto& e : kb.index.entries()) {
    nlohmann::ordered_json row;
    row["source_id"] = e.source_id;
    row["label"] = std::string(to_string(e.label));
    row["sentence"] = e.payload;
    row["vector"] = e.vector;
    entries.push_back(std::move(row));
  }
  j["entries"] = std::move(entries);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, fmt::format("cannot write '{}'", path));
  out << j.dump(1) << '\n';
  if (!out) throw Error(ErrorCode::IoFailure, fmt::format("write failed: '{}'", path));
}

CtiKb load_cti_kb(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, fmt::format("cannot open '{}'", path));
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::SchemaMismatch, fmt::format("'{}' is not JSON: {}", path, e.what()));
  }
  try {
    const auto& meta = j.at("meta");
    if (meta.at("format").get<std::string>() != kCtiKbFormat)
      throw Error(ErrorCode::SchemaMismatch, fmt::format("'{}' is not a CTI KB", path));
    if (meta.at("version").get<int>() != kCtiKbVersion)
      throw Error(ErrorCode::SchemaMismatch,
                  fmt::format("'{}' has CTI KB version {}, expected {}", path,
                              meta.at("version").get<int>(), kCtiKbVersion));
    const nlohmann::json embedder{{"mode", meta.at("embedder")},
                                  {"dim", meta.at("dim")},
                                  {"token_vectors", j.at("token_vectors")}};
    CtiKb kb{Embedder::from_json(embedder), VectorIndex(meta.at("dim").get<int>())};
    for (const auto& row : j.at("entries")) {
      const auto label_text = row.at("label").get<std::string>();
      if (label_text != "benign" && label_text != "malicious")
        throw Error(ErrorCode::SchemaMismatch, fmt::format("unknown label '{}'", label_text));
      auto vec = row.at("vector").get<Vector>();
      if (vec.size() != static_cast<std::size_t>(kb.index.dim()))
        throw Error(ErrorCode::SchemaMismatch, "entry vector has the wrong dimension");
      kb.index.add(std::move(vec), row.at("sentence").get<std::string>(),
                   label_text == "benign" ? Label::Benign : Label::Malicious,
                   row.at("source_id").get<std::string>());
    }
    return kb;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaMismatch, fmt::format("'{}': {}", path, e.what()));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::Config) throw Error(ErrorCode::SchemaMismatch, e.what());
    throw;
  }
}

}  // namespace provhunt
