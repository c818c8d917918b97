#include <doctest.h>

#include <fstream>
#include <random>

#include "planted_fixture.hpp"
#include "provhunt/errors.hpp"
#include "provhunt/export.hpp"
#include "provhunt/metrics.hpp"
#include "provhunt/reducer.hpp"

using namespace provhunt;

namespace {

struct Small {
  ProvGraph graph;
  AttackGraph attack;
};

Small small_graph() {
  const Entity p{"p1", EntityKind::Process, "/usr/bin/my \"app\""};
  const Entity f{"f1", EntityKind::File, "C:\\tmp\\x"};
  const Entity s{"s1", EntityKind::Socket, "10.0.0.1:1->10.0.0.2:80"};
  const std::vector<RawEvent> events = {{p, f, EventType::Write, 1},
                                        {p, f, EventType::Write, 2},
                                        {p, s, EventType::Send, 3}};
  Small out;
  out.graph = build_graph(reduce(events));
  for (NodeId n = 0; n < out.graph.node_count(); ++n) out.attack.nodes.push_back(n);
  std::sort(out.attack.nodes.begin(), out.attack.nodes.end(), [&](NodeId a, NodeId b) {
    return out.graph.node(a).uuid < out.graph.node(b).uuid;
  });
  for (EdgeId e = 0; e < out.graph.edge_count(); ++e) out.attack.edges.push_back(e);
  return out;
}

}  // namespace

TEST_CASE("DOT export") {
  const auto g = small_graph();
  ExportAnnotations notes;
  notes.attack_nodes = {"p1"};
  const auto dot = to_dot(g.attack, g.graph, notes);
  CHECK(dot.rfind("digraph attack {", 0) == 0);
  CHECK(dot.back() == '\n');
  CHECK(dot.find("\"p1\" [label=\"/usr/bin/my \\\"app\\\"\", shape=ellipse, color=red, fontcolor=red];") !=
        std::string::npos);
  CHECK(dot.find("\"f1\" [label=\"C:\\\\tmp\\\\x\", shape=box];") != std::string::npos);
  CHECK(dot.find("shape=diamond") != std::string::npos);
  CHECK(dot.find("\"p1\" -> \"f1\" [label=\"write x2\"];") != std::string::npos);
  CHECK(dot.find("\"p1\" -> \"s1\" [label=\"send\"];") != std::string::npos);
}

TEST_CASE("JSON export") {
  const auto g = small_graph();
  ExportAnnotations notes;
  notes.attack_nodes = {"p1"};
  notes.verdicts = {{"p1", Label::Malicious}, {"s1", Label::Benign}};
  const auto j = to_json(g.attack, g.graph, notes);
  REQUIRE(j["nodes"].size() == 3);
  CHECK(j["nodes"][0]["uuid"] == "f1");
  CHECK(j["nodes"][0]["kind"] == "File");
  CHECK(j["nodes"][0]["role"] == "context");
  CHECK(j["nodes"][0]["verdict"].is_null());
  CHECK(j["nodes"][1]["uuid"] == "p1");
  CHECK(j["nodes"][1]["role"] == "attack");
  CHECK(j["nodes"][1]["verdict"] == "malicious");
  CHECK(j["nodes"][2]["verdict"] == "benign");
  REQUIRE(j["edges"].size() == 2);
  for (const auto& e : j["edges"]) {
    // Each edge round-trips through the reduced-graph line format.
    const auto back = parse_edge(e.dump());
    CHECK(serialize_edge(back) == nlohmann::ordered_json::parse(serialize_edge(back)).dump());
  }
  CHECK(j["provenance"]["nodes"] == 3);
  CHECK(j["provenance"]["edges"] == 2);
}

TEST_CASE("metrics arithmetic on published confusion counts") {
  const Confusion c{71, 2, 55950, 9};
  const auto m = metrics(c);
  CHECK(std::abs(*m.precision - 0.973) <= 0.001);
  CHECK(std::abs(*m.recall - 0.888) <= 0.001);
  CHECK(std::abs(*m.f1 - 0.928) <= 0.001);
  CHECK(*m.accuracy == doctest::Approx((71.0 + 55950.0) / (71 + 2 + 55950 + 9)));
}

TEST_CASE("undefined metrics") {
  const auto m = metrics({});
  CHECK_FALSE(m.precision);
  CHECK_FALSE(m.recall);
  CHECK_FALSE(m.accuracy);
  CHECK_FALSE(m.f1);

  Confusion c;
  const auto e = evaluate({"a", "b"}, {}, 10, &c);
  CHECK(c.fp == 2);
  CHECK(c.tn == 8);
  CHECK_FALSE(e.precision);
  CHECK_FALSE(e.recall);
  CHECK_FALSE(e.f1);
  REQUIRE(e.accuracy);
  CHECK(*e.accuracy == doctest::Approx(0.8));
  const auto j = to_json(c, e);
  CHECK(j["precision"].is_null());
  CHECK(j["recall"].is_null());
  CHECK(j["accuracy"] == doctest::Approx(0.8));
}

TEST_CASE("confusion counts match set arithmetic") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t pop = 1 + rng() % 60;
    std::set<std::string> pred, truth;
    for (std::size_t i = 0; i < pop; ++i) {
      const auto u = "n" + std::to_string(i);
      if (rng() % 3 == 0) pred.insert(u);
      if (rng() % 4 == 0) truth.insert(u);
    }
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
    for (std::size_t i = 0; i < pop; ++i) {
      const auto u = "n" + std::to_string(i);
      const bool p = pred.contains(u), t = truth.contains(u);
      tp += p && t;
      fp += p && !t;
      fn += !p && t;
      tn += !p && !t;
    }
    const auto c = confusion(pred, truth, pop);
    CHECK(c.tp == tp);
    CHECK(c.fp == fp);
    CHECK(c.fn == fn);
    CHECK(c.tn == tn);
  }
}

TEST_CASE("uuid lists") {
  const auto dir = fixture::scratch_dir("uuids");
  std::ofstream(dir + "/t.txt") << "# truth\na\n\n  b \r\na\n";
  CHECK(load_uuid_list(dir + "/t.txt") == std::set<std::string>{"a", "b"});
  try {
    load_uuid_list(dir + "/none.txt");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::IoFailure);
  }
}
