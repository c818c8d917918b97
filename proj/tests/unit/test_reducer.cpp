#include <doctest.h>

#include <filesystem>
#include <map>
#include <random>
#include <set>

#include "oracles.hpp"
#include "planted_fixture.hpp"
#include "provhunt/errors.hpp"
#include "provhunt/reducer.hpp"

using namespace provhunt;

namespace {

const Entity P1{"P1", EntityKind::Process, "/bin/p1"};
const Entity P2{"P2", EntityKind::Process, "/bin/p2"};
const Entity F1{"F1", EntityKind::File, "/tmp/f1"};
const Entity S1{"S1", EntityKind::Socket, "1.2.3.4:1->5.6.7.8:2"};

std::vector<RawEvent> reread_events() {
  return {{F1, P1, EventType::Read, 1},
          {F1, P1, EventType::Read, 2},
          {P2, F1, EventType::Write, 3},
          {F1, P1, EventType::Read, 4}};
}

using Triple = std::tuple<std::string, std::string, EventType>;

}  // namespace

TEST_CASE("read, write, read again: three edges") {
  const auto edges = reduce(reread_events());
  REQUIRE(edges.size() == 3);
  CHECK(edges[0] == CompressedEdge{F1, P1, EventType::Read, 1, 2});
  CHECK(edges[1] == CompressedEdge{P2, F1, EventType::Write, 3, 1});
  CHECK(edges[2] == CompressedEdge{F1, P1, EventType::Read, 4, 1});
}

TEST_CASE("a single event is a single edge") {
  const auto edges = reduce(std::vector<RawEvent>{{P1, S1, EventType::Send, 7}});
  REQUIRE(edges.size() == 1);
  CHECK(edges[0].count == 1);
}

TEST_CASE("which_source follows the data") {
  CHECK(which_source({F1, P1, EventType::Read, 1}).uuid == "F1");
  CHECK(which_source({F1, P1, EventType::Mmap, 1}).uuid == "F1");
  CHECK(which_source({P1, F1, EventType::Write, 1}).uuid == "P1");
  CHECK(which_source({P1, S1, EventType::Send, 1}).uuid == "P1");
  CHECK(which_source({S1, P1, EventType::Receive, 1}).uuid == "S1");
  CHECK_THROWS_AS(which_source({P1, P2, EventType::Fork, 1}), Error);
  try {
    which_source({P1, F1, EventType::Execute, 1});
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NotAFlowEvent);
  }
}

TEST_CASE("random streams: conservation and epoch count") {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 20; ++trial) {
    const auto events = oracle::random_events(rng, 20, 200);
    const auto edges = reduce(events);

    std::map<Triple, std::uint64_t> raw_count, reduced_count, reduced_edges;
    for (const auto& e : events) ++raw_count[{e.subject.uuid, e.object.uuid, e.type}];
    for (const auto& e : edges) {
      reduced_count[{e.subject.uuid, e.object.uuid, e.type}] += e.count;
      ++reduced_edges[{e.subject.uuid, e.object.uuid, e.type}];
    }
    CHECK(raw_count == reduced_count);

    // Replay: an entity's version is the number of events that created an
    // edge into it. A flow event needs a new edge whenever its source has a
    // version not yet seen for its triple; control events always do.
    std::map<std::string, int> version;
    std::map<Triple, std::set<int>> epochs;
    std::map<Triple, std::uint64_t> expected_edges;
    std::map<Triple, int> last_epoch;
    for (const auto& e : events) {
      const Triple key{e.subject.uuid, e.object.uuid, e.type};
      bool fresh = true;
      if (is_flow(e.type)) {
        const int v = version[which_source(e).uuid];
        auto it = last_epoch.find(key);
        fresh = it == last_epoch.end() || it->second != v;
        last_epoch[key] = v;
        epochs[key].insert(v);
      }
      if (fresh) {
        ++expected_edges[key];
        ++version[e.object.uuid];
      }
    }
    CHECK(reduced_edges == expected_edges);
    for (const auto& [key, vs] : epochs) CHECK(vs.size() == reduced_edges[key]);
  }
}

TEST_CASE("random streams: taint reachability is preserved") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const auto events = oracle::random_events(rng, 15, 150);
    std::vector<std::pair<std::string, std::string>> raw, reduced;
    for (const auto& e : events) raw.emplace_back(e.subject.uuid, e.object.uuid);
    for (const auto& e : reduce(events)) reduced.emplace_back(e.subject.uuid, e.object.uuid);
    CHECK(oracle::taint_pairs(raw) == oracle::taint_pairs(reduced));
  }
}

TEST_CASE("reducing a reduced stream changes nothing") {
  std::mt19937_64 rng(5);
  const auto edges = reduce(oracle::random_events(rng, 15, 200));
  std::vector<RawEvent> expanded;
  for (const auto& e : edges) expanded.push_back({e.subject, e.object, e.type, e.t});
  const auto again = reduce(expanded);
  REQUIRE(again.size() == edges.size());
  for (std::size_t i = 0; i < edges.size(); ++i) {
    CHECK(again[i].subject == edges[i].subject);
    CHECK(again[i].object == edges[i].object);
    CHECK(again[i].type == edges[i].type);
    CHECK(again[i].t == edges[i].t);
    CHECK(again[i].count == 1);
  }
}

TEST_CASE("edge files round-trip") {
  std::mt19937_64 rng(9);
  const auto edges = reduce(oracle::random_events(rng, 10, 100));
  const auto dir = fixture::scratch_dir("edges");
  const auto path = (std::filesystem::path(dir) / "e.jsonl").string();
  write_edges(path, edges);
  CHECK(read_edges(path) == edges);
  CHECK(parse_edge(serialize_edge(edges.front())) == edges.front());
  CHECK_THROWS_AS(parse_edge(R"({"type":"read"})"), Error);
  std::filesystem::remove_all(dir);
}
