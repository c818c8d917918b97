#include "provhunt/pipeline.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "provhunt/errors.hpp"
#include "provhunt/export.hpp"
#include "provhunt/hashing.hpp"
#include "provhunt/reducer.hpp"

namespace provhunt {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

ojson edge_json(const CompressedEdge& e) { return ojson::parse(serialize_edge(e)); }

std::string file_digest(const std::string& path) {
  return path.empty() ? std::string("-") : sha256_file(path);
}

}  // namespace

void write_text(const std::string& path, std::string_view text) {
  const fs::path p(path);
  if (p.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(p.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoFailure, fmt::format("cannot write '{}'", path));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error(ErrorCode::IoFailure, fmt::format("write to '{}' failed", path));
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoFailure, fmt::format("cannot open '{}'", path));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------

Reduced ingest_and_reduce(const std::string& path, Timestamp tolerance) {
  Reduced out;
  const auto events = read_event_file(path, StreamOptions{tolerance, false}, &out.stats);
  if (out.stats.errored > 0)
    spdlog::warn("{}: {} malformed line(s) ignored", path, out.stats.errored);
  out.edges = reduce(events);
  return out;
}

BenignKb build_benign_kb(std::span<const std::string> log_paths, const std::string& embedder,
                         Timestamp tolerance) {
  if (log_paths.empty()) throw Error(ErrorCode::Config, "build-kb needs at least one benign log");
  std::vector<CompressedEdge> all;
  for (const auto& p : log_paths) {
    auto r = ingest_and_reduce(p, tolerance);
    all.insert(all.end(), r.edges.begin(), r.edges.end());
  }
  BenignKb kb;
  kb.stats = accumulate(all);
  if (embedder == "trained") {
    kb.embedder = Embedder::train(name_corpus(all));
  } else if (embedder == "hashed") {
    kb.embedder = Embedder::hashed();
  } else {
    throw Error(ErrorCode::Config, fmt::format("unknown embedder '{}'", embedder));
  }
  return kb;
}

VectorIndex reembed(const VectorIndex& index, const Embedder& embedder) {
  VectorIndex out(embedder.dim());
  for (const auto& e : index.entries())
    out.add(embed_path(embedder, e.payload), e.payload, e.label, e.source_id);
  return out;
}

// ---------------------------------------------------------------------------

std::vector<RareEvent> rare_events(const ProvGraph& graph, const EdgeScorer& scorer,
                                   std::span<const RarePath> paths) {
  std::set<EdgeId> ids;
  for (const auto& p : paths)
    for (const auto& e : p.events) ids.insert(e.edge);
  std::vector<EdgeId> ordered(ids.begin(), ids.end());
  std::stable_sort(ordered.begin(), ordered.end(),
                   [&](EdgeId a, EdgeId b) { return graph.edge(a).t < graph.edge(b).t; });
  std::vector<RareEvent> out;
  out.reserve(ordered.size());
  for (EdgeId id : ordered) {
    const auto& e = graph.edge(id);
    const auto& s = graph.node(e.src);
    const auto& d = graph.node(e.dst);
    out.push_back(RareEvent{s.uuid, d.uuid, s.name, d.name, e.type, e.t, scorer.surprisal(id)});
  }
  return out;
}

Candidates find_candidates(const ProvGraph& graph, const BenignKb& kb, const RunConfig& config) {
  Candidates c;
  c.suspicion = select_suspicious(graph, kb.embedder, kb.stats.names(), config.tau);
  for (NodeId id = 0; id < c.suspicion.size(); ++id)
    if (c.suspicion[id].suspicious) c.suspicious.push_back(id);
  std::sort(c.suspicious.begin(), c.suspicious.end(),
            [&](NodeId a, NodeId b) { return graph.node(a).uuid < graph.node(b).uuid; });

  const EdgeScorer scorer(graph, kb.stats);
  const PathSearchOptions opts{config.k1, config.k2, config.beam_width};
  for (NodeId id : c.suspicious) {
    const auto start = Clock::now();
    auto paths = rare_paths(graph, scorer, id, opts);
    c.path_seconds += seconds_since(start);
    c.rel[graph.node(id).uuid] = rare_events(graph, scorer, paths);
    c.paths.push_back(AnchorPaths{id, std::move(paths)});
  }
  return c;
}

VectorIndex retrieval_index(const ProvGraph& graph, const BenignKb& kb, const CtiKb& cti,
                            const Candidates& candidates, const RunConfig& config) {
  const std::set<NodeId> suspicious(candidates.suspicious.begin(), candidates.suspicious.end());
  std::set<NodeId> context;
  for (const auto& ap : candidates.paths)
    for (const auto& p : ap.paths)
      for (NodeId n : path_nodes(graph, p))
        if (!suspicious.contains(n)) context.insert(n);

  const EdgeScorer scorer(graph, kb.stats);
  VectorIndex index = reembed(cti.index, kb.embedder);
  for (const auto& cp : benign_context_paths(context, graph, scorer, config.k1, config.beam_width)) {
    if (cp.sentence.empty()) continue;
    index.add(embed_path(kb.embedder, cp.sentence), cp.sentence, Label::Benign, cp.node);
  }
  return index;
}

Detection detect(const ProvGraph& graph, const BenignKb& kb, const CtiKb& cti,
                 const RunConfig& config, LlmBackend& backend, const PromptTemplate& tmpl) {
  Detection d;
  d.candidates = find_candidates(graph, kb, config);
  const VectorIndex index = retrieval_index(graph, kb, cti, d.candidates, config);
  const PromptOptions popts{static_cast<std::size_t>(config.top_k), config.token_budget};
  for (const auto& ap : d.candidates.paths) {
    std::vector<std::string> queries;
    for (const auto& p : ap.paths) queries.push_back(path_sentence(graph, p));
    const auto& node = graph.node(ap.anchor);
    d.prompts.push_back(build_prompt(node.uuid, node.name, std::move(queries), index, kb.embedder,
                                     popts, tmpl));
  }
  d.verdicts = judge_all(d.prompts, backend, CompletionParams{config.model, config.temperature},
                         config.max_in_flight);
  return d;
}

ojson detection_json(const Detection& d, const ProvGraph& graph, const RunConfig& config,
                     const std::string& reduced_path) {
  ojson j;
  j["input"] = config.input;
  j["reduced_graph"] = reduced_path.empty() ? ojson(nullptr) : ojson(reduced_path);
  j["params"] = detection_params(config);
  j["graph"] = {{"nodes", graph.node_count()}, {"edges", graph.edge_count()}};

  auto suspicious = ojson::array();
  for (NodeId id : d.candidates.suspicious) {
    const auto& n = graph.node(id);
    suspicious.push_back({{"uuid", n.uuid},
                          {"name", n.name},
                          {"max_benign_similarity", d.candidates.suspicion[id].max_benign_similarity}});
  }
  j["suspicious"] = std::move(suspicious);

  auto paths = ojson::array();
  for (const auto& ap : d.candidates.paths) {
    auto list = ojson::array();
    for (const auto& p : ap.paths) {
      auto events = ojson::array();
      for (const auto& e : p.events) {
        auto ev = edge_json(graph.compressed(e.edge));
        ev["s"] = e.s;
        events.push_back(std::move(ev));
      }
      list.push_back({{"rarity", p.rarity},
                      {"sentence", path_sentence(graph, p)},
                      {"events", std::move(events)}});
    }
    paths.push_back({{"anchor", graph.node(ap.anchor).uuid}, {"paths", std::move(list)}});
  }
  j["rare_paths"] = std::move(paths);

  auto rel = ojson::array();
  for (const auto& [anchor, events] : d.candidates.rel) {
    auto list = ojson::array();
    for (const auto& e : events) {
      list.push_back({{"subj", e.subject},
                      {"obj", e.object},
                      {"subj_name", e.subject_name},
                      {"obj_name", e.object_name},
                      {"type", std::string(to_string(e.type))},
                      {"t", e.t},
                      {"res", e.score}});
    }
    rel.push_back({{"anchor", anchor}, {"events", std::move(list)}});
  }
  j["rel"] = std::move(rel);

  auto verdicts = ojson::array();
  for (std::size_t i = 0; i < d.verdicts.size(); ++i) {
    const auto& v = d.verdicts[i];
    verdicts.push_back({{"anchor", v.anchor},
                        {"label", std::string(to_string(v.label))},
                        {"unparseable", v.unparseable},
                        {"retries", v.retries_used},
                        {"truncated", d.prompts[i].truncated},
                        {"prompt_tokens", d.prompts[i].token_estimate},
                        {"response", v.raw_response}});
  }
  j["verdicts"] = std::move(verdicts);
  return j;
}

DetectionRecord load_detection(const std::string& path) {
  const std::string text = read_text(path);
  DetectionRecord r;
  try {
    const auto j = nlohmann::json::parse(text);
    r.input = j.value("input", std::string());
    if (!j.at("reduced_graph").is_null()) r.reduced_graph = j.at("reduced_graph").get<std::string>();
    for (const auto& row : j.at("rel")) {
      auto& list = r.rel[row.at("anchor").get<std::string>()];
      for (const auto& e : row.at("events")) {
        list.push_back(RareEvent{e.at("subj").get<std::string>(), e.at("obj").get<std::string>(),
                                 e.at("subj_name").get<std::string>(),
                                 e.at("obj_name").get<std::string>(),
                                 parse_event_type(e.at("type").get<std::string>()).value(),
                                 e.at("t").get<Timestamp>(), e.at("res").get<double>()});
      }
    }
    for (const auto& v : j.at("verdicts")) {
      const auto label = v.at("label").get<std::string>();
      if (label != "malicious" && label != "benign")
        throw Error(ErrorCode::SchemaMismatch, fmt::format("{}: bad verdict label '{}'", path, label));
      r.verdicts[v.at("anchor").get<std::string>()] =
          label == "malicious" ? Label::Malicious : Label::Benign;
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaMismatch, fmt::format("{}: not a detection report: {}", path, e.what()));
  } catch (const std::bad_optional_access&) {
    throw Error(ErrorCode::SchemaMismatch, fmt::format("{}: unknown event type", path));
  }
  if (!r.reduced_graph.empty() && fs::path(r.reduced_graph).is_relative() &&
      !fs::exists(r.reduced_graph)) {
    const auto sibling = fs::path(path).parent_path() / r.reduced_graph;
    if (fs::exists(sibling)) r.reduced_graph = sibling.string();
  }
  return r;
}

ProvGraph record_graph(const DetectionRecord& record, Timestamp tolerance) {
  if (!record.reduced_graph.empty()) return build_graph(read_edges(record.reduced_graph));
  if (record.input.empty() || record.input == "-")
    throw Error(ErrorCode::IoFailure, "detection report names neither a reduced graph nor an input log");
  return build_graph(ingest_and_reduce(record.input, tolerance).edges);
}

// ---------------------------------------------------------------------------

std::unique_ptr<LlmBackend> make_backend(const RunConfig& config) {
  if (config.backend == "mock") {
    std::vector<std::string> iocs;
    if (!config.iocs_file.empty()) iocs = load_keywords(config.iocs_file);
    if (iocs.empty()) spdlog::warn("mock backend has no indicators; every verdict will be benign");
    return std::make_unique<MockBackend>(std::move(iocs));
  }
  if (config.backend == "replay") return std::make_unique<ReplayBackend>(config.session);
  if (config.backend == "http") {
    if (config.api_key.empty())
      throw Error(ErrorCode::Config, "http backend needs PROVHUNT_API_KEY or OPENAI_API_KEY");
    HttpBackendConfig hc;
    hc.endpoint = config.endpoint;
    hc.api_key = config.api_key;
    return std::make_unique<HttpChatBackend>(hc);
  }
  throw Error(ErrorCode::Config, fmt::format("unknown backend '{}'", config.backend));
}

PromptTemplate load_template(const RunConfig& config) {
  return config.prompt_template.empty() ? PromptTemplate::builtin()
                                        : PromptTemplate::from_file(config.prompt_template);
}

std::vector<std::string> load_keyword_config(const RunConfig& config) {
  return config.keywords_file.empty() ? default_keywords() : load_keywords(config.keywords_file);
}

// ---------------------------------------------------------------------------

Reconstruction reconstruct(const ProvGraph& graph, const DetectionRecord& record,
                           std::span<const std::string> keywords) {
  std::vector<std::string> malicious;
  for (const auto& [uuid, label] : record.verdicts)
    if (label == Label::Malicious) malicious.push_back(uuid);
  Reconstruction r;
  r.clusters = cluster_nodes(malicious, record.rel, keywords);
  r.winner = score_and_select(r.clusters, record.rel);
  r.attack = build_attack_graph(r.winner.members, record.rel, graph);
  for (NodeId n : r.attack.nodes) r.predicted.insert(graph.node(n).uuid);
  return r;
}

ojson reconstruction_json(const Reconstruction& r, const ProvGraph& graph,
                          const DetectionRecord& record) {
  ExportAnnotations notes;
  notes.verdicts = record.verdicts;
  notes.attack_nodes.insert(r.winner.members.begin(), r.winner.members.end());
  ojson j = to_json(r.attack, graph, notes);
  auto clusters = ojson::array();
  for (const auto& c : r.clusters) {
    ojson row;
    row["members"] = c.members;
    row["score"] = c.scored ? ojson(c.score) : ojson(nullptr);
    row["selected"] = c.members == r.winner.members;
    clusters.push_back(std::move(row));
  }
  j["clusters"] = std::move(clusters);
  return j;
}

ojson run_report(const std::set<std::string>& predicted,
                 const std::optional<std::set<std::string>>& truth, std::size_t population) {
  ojson j;
  j["population"] = population;
  j["alerts"] = {{"count", predicted.size()},
                 {"percentage", population == 0 ? ojson(nullptr)
                                                : ojson(100.0 * static_cast<double>(predicted.size()) /
                                                        static_cast<double>(population))}};
  if (truth) {
    Confusion c;
    const Metrics m = evaluate(predicted, *truth, population, &c);
    j["metrics"] = to_json(c, m);
  } else {
    j["metrics"] = nullptr;
  }
  j["predicted"] = predicted;
  return j;
}

// ---------------------------------------------------------------------------

namespace {

class StageRunner {
 public:
  explicit StageRunner(fs::path dir) : dir_(std::move(dir)) {}

  /// Runs `body` unless `<name>.key` already holds `key` and every output
  /// exists.
  template <typename Body>
  void stage(const std::string& name, const std::string& key,
             std::initializer_list<std::string> outputs, Body&& body) {
    const auto key_path = dir_ / (name + ".key");
    bool fresh = fs::exists(key_path) && read_text(key_path.string()) == key;
    for (const auto& o : outputs) fresh = fresh && fs::exists(dir_ / o);
    const auto start = Clock::now();
    if (fresh) {
      spdlog::info("stage {}: up to date", name);
    } else {
      std::error_code ec;
      fs::remove(key_path, ec);
      body();
      write_text(key_path.string(), key);
    }
    timings.push_back(StageTiming{name, seconds_since(start), fresh});
  }

  std::string path(const std::string& file) const { return (dir_ / file).string(); }

  std::vector<StageTiming> timings;

 private:
  fs::path dir_;
};

std::string digest(std::initializer_list<std::string> parts) {
  std::string joined;
  for (const auto& p : parts) {
    joined += p;
    joined += '\n';
  }
  return sha256_hex(joined);
}

}  // namespace

RunOutcome run_pipeline(const RunConfig& config) {
  validate(config);
  if (config.input.empty()) throw Error(ErrorCode::Config, "run needs an input event log");
  if (config.benign_kb.empty()) throw Error(ErrorCode::Config, "run needs a benign KB");
  fs::create_directories(config.run_dir);
  StageRunner runner(config.run_dir);

  const std::string reduce_key =
      digest({"reduce", file_digest(config.input), std::to_string(config.tolerance)});
  runner.stage("reduce", reduce_key, {"reduced.jsonl", "ingest.json"}, [&] {
    auto r = ingest_and_reduce(config.input, config.tolerance);
    write_edges(runner.path("reduced.jsonl"), r.edges);
    ojson stats{{"total", r.stats.total},
                {"accepted", r.stats.accepted},
                {"skipped", r.stats.skipped},
                {"errored", r.stats.errored},
                {"reduced_edges", r.edges.size()}};
    write_text(runner.path("ingest.json"), stats.dump(2) + "\n");
  });

  std::string backend_id = config.backend;
  if (config.backend == "mock") backend_id += file_digest(config.iocs_file);
  if (config.backend == "replay") backend_id += file_digest(config.session);
  if (config.backend == "http") backend_id += config.endpoint;
  const std::string detect_key =
      digest({"detect", reduce_key, file_digest(config.benign_kb), file_digest(config.cti_kb),
              detection_params(config).dump(), std::to_string(config.max_in_flight), backend_id,
              file_digest(config.prompt_template)});
  const bool record_session = config.backend != "replay" && !config.session.empty();
  runner.stage("detect", record_session ? detect_key + "record" : detect_key, {"detect.json"}, [&] {
    const auto graph = build_graph(read_edges(runner.path("reduced.jsonl")));
    const auto kb = load_benign_kb(config.benign_kb);
    const auto cti = config.cti_kb.empty() ? CtiKb{} : load_cti_kb(config.cti_kb);
    auto backend = make_backend(config);
    std::optional<RecordingBackend> recorder;
    if (record_session) recorder.emplace(*backend);
    LlmBackend& used = recorder ? static_cast<LlmBackend&>(*recorder) : *backend;
    const auto d = detect(graph, kb, cti, config, used, load_template(config));
    if (recorder) recorder->save(config.session);
    write_text(runner.path("detect.json"),
               detection_json(d, graph, config, "reduced.jsonl").dump(2) + "\n");
  });

  const std::string reconstruct_key = digest(
      {"reconstruct", detect_key, file_digest(config.keywords_file), config.all_clusters ? "1" : "0"});
  std::optional<Error> no_attack;
  std::set<std::string> predicted;
  runner.stage("reconstruct", reconstruct_key, {"attack.json", "attack.dot"}, [&] {
    const auto record = load_detection(runner.path("detect.json"));
    const auto graph = record_graph(record, config.tolerance);
    const auto keywords = load_keyword_config(config);
    try {
      const auto r = reconstruct(graph, record, keywords);
      ExportAnnotations notes{record.verdicts, {r.winner.members.begin(), r.winner.members.end()}};
      write_text(runner.path("attack.dot"), to_dot(r.attack, graph, notes));
      write_text(runner.path("attack.json"), reconstruction_json(r, graph, record).dump(2) + "\n");
      if (config.all_clusters) {
        std::size_t i = 0;
        for (const auto& c : r.clusters) {
          if (c.members == r.winner.members) continue;
          const auto g = build_attack_graph(c.members, record.rel, graph);
          ExportAnnotations n{record.verdicts, {c.members.begin(), c.members.end()}};
          write_text(runner.path(fmt::format("cluster-{}.dot", ++i)), to_dot(g, graph, n));
        }
      }
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NoViableCluster) throw;
      // An empty attack graph is still a result worth reporting.
      write_text(runner.path("attack.dot"), to_dot(AttackGraph{}, graph, {}));
      ojson empty = to_json(AttackGraph{}, graph, {});
      empty["clusters"] = ojson::array();
      empty["error"] = e.what();
      write_text(runner.path("attack.json"), empty.dump(2) + "\n");
    }
  });

  const auto attack = nlohmann::json::parse(read_text(runner.path("attack.json")));
  for (const auto& n : attack.at("nodes")) predicted.insert(n.at("uuid").get<std::string>());
  if (attack.contains("error")) no_attack.emplace(ErrorCode::NoViableCluster, attack["error"].get<std::string>());

  const std::string report_key = digest({"report", reconstruct_key, file_digest(config.truth)});
  runner.stage("report", report_key, {"report.json"}, [&] {
    std::optional<std::set<std::string>> truth;
    if (!config.truth.empty()) truth = load_uuid_list(config.truth);
    const auto population = attack.at("provenance").at("nodes").get<std::size_t>();
    auto report = run_report(predicted, truth, population);
    report["attack_graph"] = {{"nodes", attack.at("nodes").size()},
                              {"edges", attack.at("edges").size()},
                              {"provenance_edges", attack.at("provenance").at("edges")}};
    write_text(runner.path("report.json"), report.dump(2) + "\n");
  });

  RunOutcome out;
  out.report = ojson::parse(read_text(runner.path("report.json")));
  out.timings = runner.timings;
  ojson t = ojson::array();
  for (const auto& s : out.timings) t.push_back({{"stage", s.stage}, {"seconds", s.seconds}, {"skipped", s.skipped}});
  write_text(runner.path("timings.json"), t.dump(2) + "\n");
  if (no_attack) throw *no_attack;
  return out;
}

}  // namespace provhunt
