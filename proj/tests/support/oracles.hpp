#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "provhunt/graph_store.hpp"
#include "provhunt/types.hpp"

// Brute-force reference implementations used as test oracles. Nothing here
// calls into the code under test beyond plain data accessors.
namespace provhunt::oracle {

/// `n_events` legal events over at most `n_nodes` entities with strictly
/// increasing timestamps. Names come from a small pool so that distinct
/// entities often share a name.
std::vector<RawEvent> random_events(std::mt19937_64& rng, std::size_t n_nodes,
                                    std::size_t n_events);

/// All ordered pairs (a, b), a != b, such that a reaches b through a chain
/// of edges taken in list order.
std::set<std::pair<std::string, std::string>> taint_pairs(
    const std::vector<std::pair<std::string, std::string>>& ordered_edges);

/// Group-by aggregation of name-keyed frequencies, the slow way.
struct NaiveStats {
  std::map<std::tuple<std::string, std::string, EventType>, std::uint64_t> freq;
  std::uint64_t out(const std::string& s) const;
  std::uint64_t in(const std::string& d) const;
  std::uint64_t grand() const;
};

NaiveStats naive_stats(const std::vector<CompressedEdge>& edges);

struct NaiveScore {
  double f = 0, d_out = 0, d_in = 0, s = 0;
};

/// F, D_out, D_in and S straight from their definitions, with any zero
/// numerator or denominator replaced by 1 / (1 + grand total).
NaiveScore naive_score(const NaiveStats& st, const std::string& s, const std::string& d,
                       EventType t);

struct EnumeratedPath {
  std::vector<EdgeId> back;  // away from the anchor
  std::vector<EdgeId> fwd;
  double rarity = 0.0;
};

/// Every half-path pair through `anchor`: each half is a time-respecting
/// walk (backward: non-increasing t over in-edges; forward: non-decreasing t
/// over out-edges) that is exactly k1 long or cannot be extended, never
/// repeating an edge. `surprisal[e]` is -log2 S of edge e.
std::vector<EnumeratedPath> enumerate_paths(const ProvGraph& g, NodeId anchor, int k1,
                                            const std::vector<double>& surprisal);

/// Sorts by rarity (compared at 1e-9 resolution; descending if `rarest`),
/// then first-event time, then the node uuid sequence, then edge ids.
void rank_paths(const ProvGraph& g, NodeId anchor, std::vector<EnumeratedPath>& paths, bool rarest);

/// Edge ids in walk order: reversed backward half, then forward half.
std::vector<EdgeId> walk_order(const EnumeratedPath& p);

}  // namespace provhunt::oracle
