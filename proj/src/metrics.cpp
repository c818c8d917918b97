#include "provhunt/metrics.hpp"

#include <fmt/format.h>

#include <fstream>

#include "provhunt/errors.hpp"

namespace provhunt {

namespace {

std::optional<double> ratio(std::size_t num, std::size_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

nlohmann::ordered_json maybe(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

}  // namespace

Metrics metrics(const Confusion& c) {
  Metrics m;
  m.precision = ratio(c.tp, c.tp + c.fp);
  m.recall = ratio(c.tp, c.tp + c.fn);
  m.accuracy = ratio(c.tp + c.tn, c.tp + c.tn + c.fp + c.fn);
  m.f1 = ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn);
  return m;
}

Confusion confusion(const std::set<std::string>& predicted, const std::set<std::string>& truth,
                    std::size_t population) {
  Confusion c;
  for (const auto& p : predicted) (truth.contains(p) ? c.tp : c.fp) += 1;
  for (const auto& t : truth)
    if (!predicted.contains(t)) ++c.fn;
  const std::size_t flagged_or_missed = c.tp + c.fp + c.fn;
  c.tn = population > flagged_or_missed ? population - flagged_or_missed : 0;
  return c;
}

Metrics evaluate(const std::set<std::string>& predicted, const std::set<std::string>& truth,
                 std::size_t population, Confusion* counts) {
  const Confusion c = confusion(predicted, truth, population);
  if (counts) *counts = c;
  Metrics m = metrics(c);
  if (truth.empty()) {
    m.precision.reset();
    m.recall.reset();
    m.f1.reset();
  }
  return m;
}

nlohmann::ordered_json to_json(const Confusion& c, const Metrics& m) {
  nlohmann::ordered_json j;
  j["tp"] = c.tp;
  j["fp"] = c.fp;
  j["tn"] = c.tn;
  j["fn"] = c.fn;
  j["precision"] = maybe(m.precision);
  j["recall"] = maybe(m.recall);
  j["accuracy"] = maybe(m.accuracy);
  j["f1"] = maybe(m.f1);
  return j;
}

std::set<std::string> load_uuid_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, fmt::format("cannot open '{}'", path));
  std::set<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    auto last = line.find_last_not_of(" \t");
    out.insert(line.substr(first, last - first + 1));
  }
  return out;
}

}  // namespace provhunt
