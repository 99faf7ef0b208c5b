#pragma once

// Graph merge algebra (union / intersect via edge signatures) plus output
// shaping. Signatures are built from entity keys, not surrogate ids, so
// they are stable across stores and hosts.

#include <iosfwd>
#include <string>

#include "provql/model.hpp"
#include "provql/store.hpp"

namespace provql {

struct Signature {
  EntityKey src;
  EntityKey dst;
  OpType optype = OpType::Read;

  bool operator==(const Signature& o) const;
  bool operator<(const Signature& o) const;
  std::string canonical() const;
};

// Resolves an edge's endpoints through the store that issued its ids.
Signature edge_signature(const GraphEdge& e, const EventStore& store);

// Union by signature. Identical edges (same raw event ids) appear once;
// when both inputs contribute different edges under one signature, the
// whole signature group fuses into a single edge (time hull, amount sum,
// raw_count sum, max weight). Node scores merge by max. The result uses
// s1's id space; every key of g2 must resolve in s1.
ProvGraph graph_union(const ProvGraph& g1, const EventStore& s1, const ProvGraph& g2,
                      const EventStore& s2);

// Keeps g1's edges whose signature also appears in g2; per-edge fields come
// from g1's copy and the weight is the max of the two sides. Nodes are
// restricted to endpoints of surviving edges; scores come from g1.
ProvGraph graph_intersect(const ProvGraph& g1, const EventStore& s1, const ProvGraph& g2,
                          const EventStore& s2);

// --- exports -------------------------------------------------------------------

// DOT with node labels "kind:name" and edge labels "optype [t1,t2] w=...".
// Deterministic: nodes ordered by key, edges by signature then starttime.
std::string export_dot(const ProvGraph& g, const EventStore& store);

// JSON: {nodes:[{key,attrs,rel}], edges:[{sig,start,end,amount,raw_count,
// weight,raw_ids}]}, same deterministic ordering.
std::string export_json(const ProvGraph& g, const EventStore& store);

// CSV: one edge per row, fixed header.
std::string export_csv(const ProvGraph& g, const EventStore& store);

std::string export_graph(const ProvGraph& g, const EventStore& store, const std::string& format);

// Rebuilds a graph from export_json output; endpoint keys must resolve in
// the store. Used by the round-trip checks and the REPL import path.
ProvGraph import_graph_json(const std::string& text, const EventStore& store);

}  // namespace provql
