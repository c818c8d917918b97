#include "provhunt/rag_judge.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "provhunt/errors.hpp"

namespace provhunt {

namespace {

constexpr std::string_view kPlaceholders[] = {"{{anchor_uuid}}", "{{anchor_name}}",
                                              "{{rare_paths}}", "{{benign_knowledge}}",
                                              "{{malicious_knowledge}}"};

constexpr std::string_view kBuiltinTemplate =
    R"(You are a security analyst reviewing provenance data recorded on a monitored host.

# Node under review
uuid: {{anchor_uuid}}
name: {{anchor_name}}

# Rare behaviour paths around the node
Each path lists entities and the operations between them in time order.
{{rare_paths}}

# Similar known-benign behaviours
{{benign_knowledge}}

# Similar known-malicious behaviours (threat intelligence)
{{malicious_knowledge}}

# Task
Compare the rare paths with the reference behaviours and decide whether the
node under review takes part in an attack. Answer with exactly one word:
benign or malicious.
)";

void replace_all(std::string& text, std::string_view from, std::string_view to) {
  std::size_t pos = 0;
  while ((pos = text.find(from, pos)) != std::string::npos) {
    text.replace(pos, from.size(), to);
    pos += to.size();
  }
}

std::string knowledge_block(const std::vector<Retrieved>& items, Label label, char tag) {
  std::string out;
  int n = 0;
  for (const auto& r : items) {
    if (r.label != label) continue;
    out += fmt::format("{}{} (similarity {:.3f}): {}\n", tag, ++n, r.similarity, r.sentence);
  }
  if (out.empty()) return "(none found)";
  out.pop_back();
  return out;
}

}  // namespace

PromptTemplate PromptTemplate::builtin() { return PromptTemplate(std::string(kBuiltinTemplate)); }

PromptTemplate::PromptTemplate(std::string text) : text_(std::move(text)) {
  for (auto ph : kPlaceholders) {
    if (text_.find(ph) == std::string::npos)
      throw Error(ErrorCode::Config, fmt::format("prompt template lacks placeholder {}", ph));
  }
}

PromptTemplate PromptTemplate::from_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, fmt::format("cannot open template '{}'", path));
  std::ostringstream ss;
  ss << in.rdbuf();
  return PromptTemplate(ss.str());
}

std::string PromptTemplate::render(const PromptBundle& bundle) const {
  std::string paths;
  for (std::size_t i = 0; i < bundle.query_paths.size(); ++i)
    paths += fmt::format("Q{}: {}\n", i + 1, bundle.query_paths[i]);
  if (paths.empty()) {
    paths = "(none found)";
  } else {
    paths.pop_back();
  }
  // Swap every placeholder for a marker first so substituted text is never
  // rescanned for placeholders.
  std::string out = text_;
  const std::string values[] = {bundle.anchor, bundle.anchor_name, paths,
                                knowledge_block(bundle.retrieved, Label::Benign, 'B'),
                                knowledge_block(bundle.retrieved, Label::Malicious, 'M')};
  for (std::size_t i = 0; i < std::size(kPlaceholders); ++i)
    replace_all(out, kPlaceholders[i], fmt::format("\x01{}\x01", i));
  for (std::size_t i = 0; i < std::size(kPlaceholders); ++i)
    replace_all(out, fmt::format("\x01{}\x01", i), values[i]);
  return out;
}

std::size_t estimate_tokens(std::string_view text) noexcept { return (text.size() + 3) / 4; }

PromptBundle build_prompt(std::string anchor, std::string anchor_name,
                          std::vector<std::string> query_paths, const VectorIndex& index,
                          const Embedder& embedder, const PromptOptions& options,
                          const PromptTemplate& tmpl) {
  PromptBundle b;
  b.anchor = std::move(anchor);
  b.anchor_name = std::move(anchor_name);
  b.query_paths = std::move(query_paths);

  if (!index.empty() && options.top_k > 0) {
    std::map<std::size_t, double> best;  // entry index -> best similarity
    for (const auto& q : b.query_paths) {
      const Vector v = embed_path(embedder, q);
      for (Label label : {Label::Benign, Label::Malicious}) {
        for (const auto& hit : index.query(v, options.top_k, label)) {
          auto [it, inserted] = best.emplace(hit.index, hit.similarity);
          if (!inserted) it->second = std::max(it->second, hit.similarity);
        }
      }
    }
    std::map<std::pair<Label, std::string>, double> unique;
    for (const auto& [i, sim] : best) {
      const auto& e = index.entry(i);
      if (std::find(b.query_paths.begin(), b.query_paths.end(), e.payload) != b.query_paths.end())
        continue;
      auto [it, inserted] = unique.emplace(std::make_pair(e.label, e.payload), sim);
      if (!inserted) it->second = std::max(it->second, sim);
    }
    for (const auto& [key, sim] : unique) b.retrieved.push_back({key.first, key.second, sim});
    std::stable_sort(b.retrieved.begin(), b.retrieved.end(),
                     [](const Retrieved& x, const Retrieved& y) { return x.similarity > y.similarity; });
  }

  b.rendered = tmpl.render(b);
  b.token_estimate = estimate_tokens(b.rendered);
  while (b.token_estimate > options.token_budget && !b.retrieved.empty()) {
    b.retrieved.pop_back();
    b.truncated = true;
    b.rendered = tmpl.render(b);
    b.token_estimate = estimate_tokens(b.rendered);
  }
  if (b.token_estimate > options.token_budget)
    spdlog::warn("prompt for {} needs ~{} tokens with no retrieved context (budget {})", b.anchor,
                 b.token_estimate, options.token_budget);
  return b;
}

std::optional<Label> parse_verdict(std::string_view response) {
  std::string lower(response);
  for (char& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  const auto mal = lower.find("malicious");
  const auto ben = lower.find("benign");
  if (mal == std::string::npos && ben == std::string::npos) return std::nullopt;
  return mal < ben ? Label::Malicious : Label::Benign;
}

Verdict judge(const PromptBundle& bundle, LlmBackend& backend, const CompletionParams& params) {
  Verdict v;
  v.anchor = bundle.anchor;
  v.raw_response = backend.complete(bundle.rendered, params);
  auto label = parse_verdict(v.raw_response);
  if (!label) {
    v.retries_used = 1;
    v.raw_response =
        backend.complete(bundle.rendered + std::string(kStrictRetryInstruction), params);
    label = parse_verdict(v.raw_response);
  }
  if (!label) {
    spdlog::warn("unparseable verdict for {}; defaulting to benign", bundle.anchor);
    v.unparseable = true;
    label = Label::Benign;
  }
  v.label = *label;
  return v;
}

std::vector<Verdict> judge_all(std::span<const PromptBundle> bundles, LlmBackend& backend,
                               const CompletionParams& params, std::size_t max_in_flight) {
  std::vector<Verdict> out(bundles.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex error_mu;

  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= bundles.size() || failed.load()) return;
      try {
        out[i] = judge(bundles[i], backend, params);
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!first_error) first_error = std::current_exception();
        failed = true;
      }
    }
  };

  const std::size_t workers = std::clamp<std::size_t>(max_in_flight, 1, std::max<std::size_t>(bundles.size(), 1));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  if (first_error) std::rethrow_exception(first_error);
  return out;
}

}  // namespace provhunt
