#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "oracles.hpp"
#include "provhunt/errors.hpp"
#include "provhunt/graph_store.hpp"
#include "provhunt/reducer.hpp"

using namespace provhunt;

namespace {

const Entity P1{"P1", EntityKind::Process, "/bin/p1"};
const Entity P2{"P2", EntityKind::Process, "/bin/p2"};
const Entity F1{"F1", EntityKind::File, "/tmp/f1"};

ProvGraph reread_graph() {
  return build_graph(reduce(std::vector<RawEvent>{{F1, P1, EventType::Read, 1},
                                                  {F1, P1, EventType::Read, 2},
                                                  {P2, F1, EventType::Write, 3},
                                                  {F1, P1, EventType::Read, 4}}));
}

}  // namespace

TEST_CASE("insert into an empty graph") {
  ProvGraph g;
  g.insert({F1, P1, EventType::Read, 1, 1});
  CHECK(g.node_count() == 2);
  CHECK(g.edge_count() == 1);
}

TEST_CASE("reread-after-write graph") {
  const auto g = reread_graph();
  CHECK(g.node_count() == 3);
  CHECK(g.edge_count() == 3);
}

TEST_CASE("neighbors_after on the reread-after-write graph") {
  const auto g = reread_graph();
  CHECK(g.neighbors_after("F1", 2, Direction::Backward).empty());
  const auto fwd = g.neighbors_after("F1", 0, Direction::Forward);
  REQUIRE(fwd.size() == 2);
  CHECK(g.edge(fwd[0]).t == 1);
  CHECK(g.edge(fwd[1]).t == 4);
  CHECK(g.neighbors_after("F1", 3, Direction::Backward).size() == 1);
  CHECK(g.neighbors_after("P2", 0, Direction::Backward).empty());
  CHECK_THROWS_AS(g.neighbors_after("nope", 0, Direction::Forward), Error);
}

TEST_CASE("adjacency lists stay sorted under random inserts") {
  std::mt19937_64 rng(1);
  ProvGraph g;
  std::vector<Entity> procs, files;
  for (int i = 0; i < 20; ++i) {
    procs.push_back({"p" + std::to_string(i), EntityKind::Process, "proc"});
    files.push_back({"f" + std::to_string(i), EntityKind::File, "file"});
  }
  for (int i = 0; i < 1000; ++i) {
    const Timestamp t = static_cast<Timestamp>(rng() % 500);
    if (rng() % 2)
      g.insert({procs[rng() % 20], files[rng() % 20], EventType::Write, t, 1});
    else
      g.insert({files[rng() % 20], procs[rng() % 20], EventType::Read, t, 1});
  }
  CHECK(g.edge_count() == 1000);
  for (NodeId n = 0; n < g.node_count(); ++n) {
    for (const auto list : {g.out_edges(n), g.in_edges(n)}) {
      // Oracle: a full re-sort by (t, insertion id).
      std::vector<EdgeId> resorted(list.begin(), list.end());
      std::sort(resorted.begin(), resorted.end(), [&](EdgeId a, EdgeId b) {
        return g.edge(a).t != g.edge(b).t ? g.edge(a).t < g.edge(b).t : a < b;
      });
      CHECK(std::equal(list.begin(), list.end(), resorted.begin(), resorted.end()));
    }
  }
}

TEST_CASE("neighbors_after agrees with a linear scan") {
  std::mt19937_64 rng(2);
  const auto g = build_graph(reduce(oracle::random_events(rng, 15, 300)));
  for (NodeId n = 0; n < g.node_count(); ++n) {
    for (Timestamp t0 : {Timestamp{0}, Timestamp{100}, Timestamp{300}, Timestamp{10000}}) {
      std::vector<EdgeId> fwd, bwd;
      for (EdgeId e = 0; e < g.edge_count(); ++e) {
        if (g.edge(e).src == n && g.edge(e).t >= t0) fwd.push_back(e);
        if (g.edge(e).dst == n && g.edge(e).t <= t0) bwd.push_back(e);
      }
      std::stable_sort(fwd.begin(), fwd.end(), [&](EdgeId a, EdgeId b) { return g.edge(a).t < g.edge(b).t; });
      std::stable_sort(bwd.begin(), bwd.end(), [&](EdgeId a, EdgeId b) { return g.edge(a).t > g.edge(b).t; });
      const auto got_f = g.neighbors_after(n, t0, Direction::Forward);
      const auto got_b = g.neighbors_after(n, t0, Direction::Backward);
      CHECK(std::vector<EdgeId>(got_f.begin(), got_f.end()) == fwd);
      // Backward ties in t may come in either insertion order; compare as
      // time sequences plus sets.
      REQUIRE(got_b.size() == bwd.size());
      for (std::size_t i = 0; i < bwd.size(); ++i) CHECK(g.edge(got_b[i]).t == g.edge(bwd[i]).t);
      CHECK(std::set<EdgeId>(got_b.begin(), got_b.end()) == std::set<EdgeId>(bwd.begin(), bwd.end()));
    }
  }
}

TEST_CASE("node and edge counts match the reduced stream") {
  std::mt19937_64 rng(4);
  const auto edges = reduce(oracle::random_events(rng, 12, 100));
  const auto g = build_graph(edges);
  std::set<std::string> uuids;
  for (const auto& e : edges) {
    uuids.insert(e.subject.uuid);
    uuids.insert(e.object.uuid);
  }
  CHECK(g.node_count() == uuids.size());
  CHECK(g.edge_count() == edges.size());
  for (EdgeId e = 0; e < g.edge_count(); ++e) CHECK(g.compressed(e) == edges[e]);
  CHECK_THROWS_AS(g.id_of("missing"), Error);
}
