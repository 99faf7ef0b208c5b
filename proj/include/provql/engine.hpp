#pragma once

// Query execution: POI lookup, constrained incremental BFS/DFS against the
// store, the weighting/propagation stages, entry selection, and the merge
// fold. Traversals fetch only frontier adjacency (with time-bound pushdown
// and delta windows on re-expansion), never the whole log.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "provql/analytics.hpp"
#include "provql/ast.hpp"
#include "provql/evaluator.hpp"
#include "provql/model.hpp"
#include "provql/store.hpp"

namespace provql {

struct Limits {
  std::uint64_t max_nodes = 5'000'000;
  std::uint64_t max_edges = 5'000'000;
  int max_depth = 0;  // 0 = unlimited
};

struct EngineConfig {
  Limits limits;
  TimestampNs merge_gap_ns = 10'000'000'000;  // 10 s
  double epsilon = 1e-13;
  int max_iters = 1000;
  std::uint64_t seed = 0;
  bool emit_prenorm_weights = false;  // expose pre-normalization weights in the report
  bool parallel_kernels = true;
  bool parallel_subqueries = false;
};

struct EngineError {
  std::string message;
};

struct PoiResult {
  Event event;
  EntityId anchor_node = 0;  // binding of the traversal's start variable
  EntityId src_node = 0;
  EntityId dst_node = 0;
  std::string event_var;  // st
  std::string src_var;    // p
  std::string dst_var;    // f
};

// Resolves the POI pattern. Throws EngineError on zero matches ("POI not
// found") or several matches without a bound id ("ambiguous POI", listing
// the candidate event ids).
PoiResult locate_poi(const ast::PoiMatch& match, const EventStore& store);

// Constrained backward search from the POI: fixpoint of fetching
// incoming(v, StartBefore(bound(v))) and accepting candidates that satisfy
// the step WHERE under discovered-graph adjacency. bound(v) is the max
// endtime of v's discovered out-edges, seeded at the anchor with the POI
// event's endtime. Exceeding the limits yields a truncated graph.
ProvGraph backward_search(const PoiResult& poi, const ast::TraverseSpec& spec,
                          const EventStore& store, const Limits& limits);

// Mirror image: seeds every entry with a bound that admits all of its
// out-edges, fetches outgoing(u, EndAfter(bound(u))), applies the step
// WHERE (including any global temporal cutoff) and unions the expansion of
// all entries in one traversal.
ProvGraph forward_search(const std::vector<EntityId>& entries, const ast::TraverseSpec& spec,
                         const EventStore& store, const Limits& limits);

// Nodes of g passing the entry filter, ordered by the key (descending when
// requested), ties broken by ascending entity id, truncated to LIMIT.
std::vector<EntityId> select_entries(const ProvGraph& g, const ast::EntryMatch& spec,
                                     const EventStore& store);

// --- reports ---------------------------------------------------------------------

struct StageReport {
  std::string stage;
  std::uint64_t edges = 0;
  std::uint64_t nodes = 0;
  double millis = 0.0;
  bool truncated = false;
  std::string detail;
};

struct SubQueryReport {
  std::uint64_t backward_edges = 0;  // raw, before merging
  std::uint64_t merged_edges = 0;
  std::uint64_t filtered_edges = 0;
  bool has_weight_filter = false;
  std::uint64_t forward_edges = 0;  // raw
  std::uint64_t entry_count = 0;
  std::uint64_t pg_edges = 0;  // after intra-sub-query merges
  bool propagation_converged = true;
  bool truncated = false;
  std::string model_dump;  // projection model JSON, when weighting ran
  std::vector<StageReport> stages;
};

struct ExecutionReport {
  std::vector<SubQueryReport> sub_queries;
  std::uint64_t final_edges = 0;
  std::uint64_t final_nodes = 0;
  std::uint64_t fetch_count = 0;
  double total_millis = 0.0;

  std::string to_json() const;
  std::string summary() const;  // one line per sub-query plus totals
};

struct ExecuteResult {
  ProvGraph graph;
  ExecutionReport report;
  // Graphs by their YIELD names, post-processing (REPL reuses these).
  std::map<std::string, ProvGraph> named_graphs;
};

// Runs a validated AST: each sub-query's stage pipeline in order, intra
// merges, then the cross-sub-query union/intersect fold, left to right.
// Throws EngineError with the failing stage context.
ExecuteResult execute(const ast::QueryAst& ast, const EventStore& store,
                      const EngineConfig& config);

}  // namespace provql
