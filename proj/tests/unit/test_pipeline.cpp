#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "planted_run.hpp"
#include "provhunt/errors.hpp"
#include "provhunt/reducer.hpp"

using namespace provhunt;
namespace fs = std::filesystem;

namespace {

bool all_skipped(const RunOutcome& o) {
  for (const auto& t : o.timings)
    if (!t.skipped) return false;
  return !o.timings.empty();
}

}  // namespace

TEST_CASE("planted intrusion end to end") {
  auto setup = fixture::prepare_planted("pipeline-e2e");
  const auto out = run_pipeline(setup.config);
  const auto& m = out.report["metrics"];
  CHECK(m["precision"] == 1.0);
  CHECK(m["recall"] == 1.0);
  CHECK(m["fp"] == 0);
  CHECK(m["fn"] == 0);
  std::set<std::string> predicted = out.report["predicted"];
  CHECK(predicted == setup.planted.truth);
  for (const auto& d : setup.planted.decoys) CHECK_FALSE(predicted.contains(d));

  for (const char* f : {"reduced.jsonl", "ingest.json", "detect.json", "attack.dot", "attack.json",
                        "report.json", "timings.json"})
    CHECK(fs::exists(setup.config.run_dir + "/" + f));
  const auto edges = out.report["attack_graph"]["edges"].get<double>();
  const auto total = out.report["attack_graph"]["provenance_edges"].get<double>();
  CHECK(edges / total <= 0.01);
}

TEST_CASE("mock verdicts follow the indicator rule on each anchor's rare paths") {
  const auto setup = fixture::prepare_planted("pipeline-mock");
  const auto r = fixture::run_planted_in_process(setup, setup.config);
  const MockBackend mock(load_keywords(setup.files.iocs));
  REQUIRE(r.detection.verdicts.size() == r.detection.prompts.size());
  for (std::size_t i = 0; i < r.detection.prompts.size(); ++i) {
    const bool flagged = mock.flags(r.detection.prompts[i].query_paths);
    CHECK((r.detection.verdicts[i].label == Label::Malicious) == flagged);
  }
}

TEST_CASE("unchanged inputs skip every stage") {
  auto setup = fixture::prepare_planted("pipeline-cache");
  const auto first = run_pipeline(setup.config);
  for (const auto& t : first.timings) CHECK_FALSE(t.skipped);
  const auto report = read_text(setup.config.run_dir + "/report.json");
  const auto second = run_pipeline(setup.config);
  CHECK(all_skipped(second));
  CHECK(read_text(setup.config.run_dir + "/report.json") == report);

  // A detection knob invalidates detect and everything after it.
  setup.config.top_k = 3;
  const auto third = run_pipeline(setup.config);
  REQUIRE(third.timings.size() == 4);
  CHECK(third.timings[0].skipped);
  CHECK_FALSE(third.timings[1].skipped);
  CHECK_FALSE(third.timings[3].skipped);

  // So does a missing output.
  fs::remove(setup.config.run_dir + "/attack.dot");
  const auto fourth = run_pipeline(setup.config);
  CHECK(fourth.timings[1].skipped);
  CHECK_FALSE(fourth.timings[2].skipped);
  CHECK(fs::exists(setup.config.run_dir + "/attack.dot"));
}

TEST_CASE("recorded sessions replay byte-identically") {
  auto setup = fixture::prepare_planted("pipeline-replay");
  const std::string session = setup.dir + "/session.json";
  auto record = setup.config;
  record.session = session;
  record.run_dir = setup.dir + "/rec";
  run_pipeline(record);
  REQUIRE(fs::exists(session));

  auto replay = setup.config;
  replay.backend = "replay";
  replay.session = session;
  replay.run_dir = setup.dir + "/a";
  run_pipeline(replay);
  replay.run_dir = setup.dir + "/b";
  run_pipeline(replay);
  for (const char* f : {"report.json", "attack.dot", "attack.json", "detect.json"})
    CHECK(read_text(setup.dir + "/a/" + f) == read_text(setup.dir + "/b/" + f));
  // The recording run differs only in the backend name inside detect.json.
  for (const char* f : {"report.json", "attack.dot", "attack.json"})
    CHECK(read_text(setup.dir + "/a/" + f) == read_text(setup.dir + "/rec/" + f));
}

TEST_CASE("detection reports round-trip") {
  const auto setup = fixture::prepare_planted("pipeline-record");
  const auto r = fixture::run_planted_in_process(setup, setup.config);
  const std::string reduced = setup.dir + "/reduced.jsonl";
  std::vector<CompressedEdge> edges;
  for (EdgeId e = 0; e < r.graph.edge_count(); ++e) edges.push_back(r.graph.compressed(e));
  write_edges(reduced, edges);
  const auto j = detection_json(r.detection, r.graph, setup.config, "reduced.jsonl");
  write_text(setup.dir + "/detect.json", j.dump(2));

  const auto rec = load_detection(setup.dir + "/detect.json");
  CHECK(rec.rel == r.detection.candidates.rel);
  CHECK(rec.verdicts.size() == r.detection.verdicts.size());
  for (const auto& v : r.detection.verdicts) CHECK(rec.verdicts.at(v.anchor) == v.label);
  const auto g = record_graph(rec);
  CHECK(g.edge_count() == r.graph.edge_count());
  CHECK(g.node_count() == r.graph.node_count());

  write_text(setup.dir + "/broken.json", "{\"input\": 3}");
  try {
    load_detection(setup.dir + "/broken.json");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SchemaMismatch);
  }
}

TEST_CASE("no malicious verdicts: empty attack graph, then NoViableCluster") {
  auto setup = fixture::prepare_planted("pipeline-none");
  write_text(setup.dir + "/no-iocs.txt", "# nothing\n");
  setup.config.iocs_file = setup.dir + "/no-iocs.txt";
  try {
    run_pipeline(setup.config);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NoViableCluster);
  }
  const auto report = nlohmann::json::parse(read_text(setup.config.run_dir + "/report.json"));
  CHECK(report["predicted"].empty());
  CHECK(report["metrics"]["recall"] == 0.0);
  const auto attack = nlohmann::json::parse(read_text(setup.config.run_dir + "/attack.json"));
  CHECK(attack.contains("error"));
}

TEST_CASE("missing inputs are configuration errors") {
  RunConfig c;
  try {
    run_pipeline(c);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Config);
  }
}
