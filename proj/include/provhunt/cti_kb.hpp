#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "provhunt/embedder.hpp"

namespace provhunt {

enum class Label { Benign, Malicious };

std::string_view to_string(Label label) noexcept;

struct IndexEntry {
  Vector vector;
  std::string payload;
  Label label = Label::Malicious;
  std::string source_id;

  friend bool operator==(const IndexEntry&, const IndexEntry&) = default;
};

struct Hit {
  std::size_t index = 0;
  double similarity = 0.0;
};

/// Exact cosine index. Vectors are normalized on insertion.
class VectorIndex {
 public:
  explicit VectorIndex(int dim = Embedder::kDefaultDim) : dim_(dim) {}

  /// Throws Error(Config) on a dimension mismatch or a zero vector.
  void add(Vector vector, std::string payload, Label label, std::string source_id = {});

  /// Top-k by cosine, descending; ties keep insertion order. `only` restricts
  /// the scan to one label. Throws Error(EmptyIndex) if the index is empty.
  std::vector<Hit> query(std::span<const float> vector, std::size_t k,
                         std::optional<Label> only = std::nullopt) const;

  const IndexEntry& entry(std::size_t i) const { return entries_[i]; }
  const std::vector<IndexEntry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  int dim() const noexcept { return dim_; }

  friend bool operator==(const VectorIndex&, const VectorIndex&) = default;

 private:
  int dim_;
  std::vector<IndexEntry> entries_;
};

/// Relation words accepted at edge positions of a path sentence: the seven
/// tracked event types plus common verbs produced by CTI extractors.
bool is_relation_token(std::string_view word);

/// Splits "v1 e1 v2 ... vn" on whitespace and checks that node and relation
/// words alternate, starting and ending on a node. Throws Error(MalformedPath).
std::vector<std::string> split_path_sentence(std::string_view sentence);

/// Words fed to the embedder: node names tokenized, relation words as-is.
std::vector<std::string> path_tokens(std::string_view sentence);

Vector embed_path(const Embedder& embedder, std::string_view sentence);

struct MalPath {
  std::string source_id;
  std::string sentence;
};

/// Tab-separated (source_id, sentence), one per line; blank lines and '#'
/// comments are ignored. Throws Error(MalformedPath) with the line number.
std::vector<MalPath> read_asg_file(const std::string& path);

struct CtiKb {
  Embedder embedder = Embedder::hashed();
  VectorIndex index{Embedder::kDefaultDim};

  friend bool operator==(const CtiKb&, const CtiKb&) = default;
};

/// Embeds and appends every path in `path`, labelled malicious. Returns the
/// number of paths added.
std::size_t ingest_asg(CtiKb& kb, const std::string& path);

void save_cti_kb(const CtiKb& kb, const std::string& path);
CtiKb load_cti_kb(const std::string& path);

inline constexpr std::string_view kCtiKbFormat = "provhunt-cti-kb";
inline constexpr int kCtiKbVersion = 1;

}  // namespace provhunt
