#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "provhunt/anomaly.hpp"
#include "provhunt/benign_kb.hpp"
#include "provhunt/config.hpp"
#include "provhunt/cti_kb.hpp"
#include "provhunt/event_ingest.hpp"
#include "provhunt/graph_store.hpp"
#include "provhunt/llm_backend.hpp"
#include "provhunt/metrics.hpp"
#include "provhunt/rag_judge.hpp"
#include "provhunt/reconstruct.hpp"

namespace provhunt {

// ---------------------------------------------------------------------------
// Knowledge bases
// ---------------------------------------------------------------------------

struct Reduced {
  std::vector<CompressedEdge> edges;
  IngestStats stats;
};

/// Reads a newline-delimited event log ("-" for stdin) and reduces it.
Reduced ingest_and_reduce(const std::string& path, Timestamp tolerance = 0);

/// Frequency statistics over all logs plus a name embedder ("hashed" or
/// "trained" on the logs' entity names).
BenignKb build_benign_kb(std::span<const std::string> log_paths, const std::string& embedder,
                         Timestamp tolerance = 0);

/// A copy of the CTI index with every path re-embedded by `embedder`, so
/// queries and entries share one vector space.
VectorIndex reembed(const VectorIndex& index, const Embedder& embedder);

// ---------------------------------------------------------------------------
// Detection
// ---------------------------------------------------------------------------

struct AnchorPaths {
  NodeId anchor = 0;
  std::vector<RarePath> paths;
};

struct Candidates {
  std::vector<SuspicionResult> suspicion;  // every node, node-id order
  std::vector<NodeId> suspicious;          // sorted by uuid
  std::vector<AnchorPaths> paths;          // parallel to `suspicious`
  RareEventList rel;
  double path_seconds = 0.0;  // wall time inside rare_paths
};

/// Suspicious node selection, rare paths and the rare-event list.
Candidates find_candidates(const ProvGraph& graph, const BenignKb& kb, const RunConfig& config);

/// Distinct events across `paths`, ordered by (t, edge id), each scored
/// with its surprisal -log2 S.
std::vector<RareEvent> rare_events(const ProvGraph& graph, const EdgeScorer& scorer,
                                   std::span<const RarePath> paths);

/// Benign context paths of the non-suspicious neighbours of the candidates
/// plus the CTI paths, in one index over the benign KB's embedder.
VectorIndex retrieval_index(const ProvGraph& graph, const BenignKb& kb, const CtiKb& cti,
                            const Candidates& candidates, const RunConfig& config);

struct Detection {
  Candidates candidates;
  std::vector<PromptBundle> prompts;
  std::vector<Verdict> verdicts;  // parallel to candidates.suspicious
};

Detection detect(const ProvGraph& graph, const BenignKb& kb, const CtiKb& cti,
                 const RunConfig& config, LlmBackend& backend, const PromptTemplate& tmpl);

/// `reduced_path` may be empty; config.input is recorded as the fallback.
nlohmann::ordered_json detection_json(const Detection& d, const ProvGraph& graph,
                                      const RunConfig& config, const std::string& reduced_path);

/// What reconstruction needs from a detection report.
struct DetectionRecord {
  std::string input;          // raw event log
  std::string reduced_graph;  // may be empty
  RareEventList rel;
  std::map<std::string, Label> verdicts;
};

DetectionRecord load_detection(const std::string& path);

/// The reduced graph named by the record, or the re-reduced input log.
ProvGraph record_graph(const DetectionRecord& record, Timestamp tolerance = 0);

// ---------------------------------------------------------------------------
// Judge backends
// ---------------------------------------------------------------------------

/// Builds the configured backend. The mock reads its indicators from
/// config.iocs_file (one per line).
std::unique_ptr<LlmBackend> make_backend(const RunConfig& config);

/// Loads config.prompt_template or the built-in prompt.
PromptTemplate load_template(const RunConfig& config);

/// Loads config.keywords_file or the built-in list.
std::vector<std::string> load_keyword_config(const RunConfig& config);

// ---------------------------------------------------------------------------
// Reconstruction and reporting
// ---------------------------------------------------------------------------

struct Reconstruction {
  std::vector<Cluster> clusters;
  Cluster winner;
  AttackGraph attack;
  std::set<std::string> predicted;  // uuids of attack-graph nodes
};

/// Throws Error(NoViableCluster) when no multi-node cluster exists.
Reconstruction reconstruct(const ProvGraph& graph, const DetectionRecord& record,
                           std::span<const std::string> keywords);

nlohmann::ordered_json reconstruction_json(const Reconstruction& r, const ProvGraph& graph,
                                           const DetectionRecord& record);

/// Confusion counts and metrics for the predicted uuids, plus the alert
/// count and its share of the population in percent. Without ground truth
/// the metrics are null.
nlohmann::ordered_json run_report(const std::set<std::string>& predicted,
                                  const std::optional<std::set<std::string>>& truth,
                                  std::size_t population);

// ---------------------------------------------------------------------------
// End-to-end run
// ---------------------------------------------------------------------------

struct StageTiming {
  std::string stage;
  double seconds = 0.0;
  bool skipped = false;
};

struct RunOutcome {
  nlohmann::ordered_json report;
  std::vector<StageTiming> timings;
};

/// Runs reduce -> detect -> reconstruct -> report under config.run_dir.
/// Every stage writes `<stage>.key` holding a digest of its inputs and is
/// skipped when that digest and its outputs are already present. Files:
/// reduced.jsonl, ingest.json, detect.json, attack.dot, attack.json,
/// report.json and timings.json (the only file with wall-clock data).
RunOutcome run_pipeline(const RunConfig& config);

/// Writes `text` to `path`, creating parent directories. Throws
/// Error(IoFailure).
void write_text(const std::string& path, std::string_view text);
std::string read_text(const std::string& path);

}  // namespace provhunt
