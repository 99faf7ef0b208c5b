#pragma once

// Core domain types: system entities, audit events, and provenance graphs.
// Everything here is an immutable value type once constructed; graphs are
// plain aggregates that callers copy or share read-only.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace provql {

using EntityId = std::uint64_t;
using EventId = std::uint64_t;
using TimestampNs = std::int64_t;  // nanoseconds since epoch, never floating point

enum class EntityKind : std::uint8_t { File, Process, Network };

// Closed set of audit operations. Anything else is rejected at import.
// The numeric values are the on-disk encoding of the file-backed store.
enum class OpType : std::uint8_t {
  Read = 0,
  Write = 1,
  Rename = 2,
  CreateObject = 3,
  Execute = 4,
  Clone = 5,
  Recvmsg = 6,
  Sendmsg = 7,
};

inline constexpr int kOpTypeCount = 8;

const char* to_string(EntityKind k);
const char* to_string(OpType t);
std::optional<EntityKind> entity_kind_from_string(const std::string& s);
std::optional<OpType> optype_from_string(const std::string& s);

// Host-scoped identity of a node. Two records with an equal key are the
// same node; the discriminator depends on the kind:
//   File    -> path
//   Process -> (pid, name)
//   Network -> (src_ip, src_port, dst_ip, dst_port)
struct EntityKey {
  std::string host_id;
  EntityKind kind = EntityKind::File;
  std::string path;      // File
  std::string name;      // Process
  std::uint64_t pid = 0; // Process
  std::string src_ip;    // Network
  std::uint32_t src_port = 0;
  std::string dst_ip;
  std::uint32_t dst_port = 0;

  static EntityKey file(std::string host, std::string path);
  static EntityKey process(std::string host, std::uint64_t pid, std::string name);
  static EntityKey network(std::string host, std::string src_ip, std::uint32_t src_port,
                           std::string dst_ip, std::uint32_t dst_port);

  bool operator==(const EntityKey& o) const;
  // Total order used for deterministic exports (nodes sorted by key).
  bool operator<(const EntityKey& o) const;

  // Human-readable discriminator, e.g. "/tmp/x" or "42:bash" or "a:1>b:2".
  std::string display_name() const;
  // Stable textual form of the full key, usable as a map key.
  std::string canonical() const;

  // Empty when the discriminator fields required by `kind` are present.
  std::vector<std::string> validate() const;
};

struct EntityKeyHash {
  std::size_t operator()(const EntityKey& k) const;
};

struct Entity {
  EntityId id = 0;
  EntityKey key;
  std::map<std::string, std::string> attrs;  // name, path, pid, ips/ports as applicable
};

struct Event {
  EventId id = 0;
  EntityId src = 0;
  EntityId dst = 0;
  OpType optype = OpType::Read;
  TimestampNs starttime = 0;
  TimestampNs endtime = 0;
  std::uint64_t amount = 0;  // bytes; 0 for process events
  std::string host_id;

  bool operator==(const Event& o) const = default;
};

// Returns every violated invariant of `e` (empty list means ok).
// Checked: starttime <= endtime, src != dst, both endpoints known.
std::vector<std::string> validate_event(const Event& e,
                                        const std::unordered_set<EntityId>& known_entities);

// An edge of a result graph. A raw edge wraps exactly one audit event
// (raw_count == 1); merged edges carry the time hull and amount sum of the
// events they fused.
struct GraphEdge {
  EntityId src = 0;
  EntityId dst = 0;
  OpType optype = OpType::Read;
  TimestampNs starttime = 0;
  TimestampNs endtime = 0;
  std::uint64_t amount = 0;
  std::uint64_t raw_count = 1;
  std::optional<double> weight;  // in [0,1] when set
  std::vector<EventId> raw_ids;

  static GraphEdge from_event(const Event& e);
};

// A materialized provenance graph: entity ids, (possibly merged) edges and
// optional per-node impact scores. Every edge endpoint is in `nodes`.
struct ProvGraph {
  std::unordered_set<EntityId> nodes;
  std::vector<GraphEdge> edges;
  std::unordered_map<EntityId, double> scores;  // rel, finite and non-negative
  bool truncated = false;
  bool propagation_converged = true;

  void add_edge(GraphEdge e);
  bool empty() const { return edges.empty() && nodes.empty(); }

  // Edges leaving / entering a node, as indices into `edges`.
  std::vector<std::size_t> out_edges(EntityId u) const;
  std::vector<std::size_t> in_edges(EntityId v) const;

  // Set of raw event ids across all edges.
  std::unordered_set<EventId> raw_id_set() const;
};

// Precomputed adjacency over a graph snapshot; edge indices refer into
// g.edges. Invalidated by any mutation of the graph's edge list.
struct GraphAdjacency {
  GraphAdjacency() = default;
  explicit GraphAdjacency(const ProvGraph& g);

  const std::vector<std::size_t>& out(EntityId u) const;
  const std::vector<std::size_t>& in(EntityId v) const;

 private:
  std::unordered_map<EntityId, std::vector<std::size_t>> out_;
  std::unordered_map<EntityId, std::vector<std::size_t>> in_;
  std::vector<std::size_t> empty_;
};

}  // namespace provql
