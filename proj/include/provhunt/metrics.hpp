#pragma once

#include <cstddef>
#include <optional>
#include <set>
#include <string>

#include <json.hpp>

namespace provhunt {

struct Confusion {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;
};

/// Ratios are nullopt when their denominator is zero.
struct Metrics {
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> accuracy;
  std::optional<double> f1;
};

Metrics metrics(const Confusion& c);

/// Node-level confusion over uuids; `population` is the number of nodes
/// that could have been flagged.
Confusion confusion(const std::set<std::string>& predicted, const std::set<std::string>& truth,
                    std::size_t population);

/// Like metrics(confusion(...)), except that an empty ground truth leaves
/// precision, recall and F1 undefined.
Metrics evaluate(const std::set<std::string>& predicted, const std::set<std::string>& truth,
                 std::size_t population, Confusion* counts = nullptr);

/// Undefined values serialize as null.
nlohmann::ordered_json to_json(const Confusion& c, const Metrics& m);

/// Newline-delimited uuid list; blank lines and '#' comments are skipped.
std::set<std::string> load_uuid_list(const std::string& path);

}  // namespace provhunt
