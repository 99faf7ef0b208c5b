#pragma once

// Indexed event storage with incremental adjacency fetches. Traversals pull
// only the adjacency of frontier nodes; nothing ever materializes the whole
// log. Two variants share the contract: a memory-resident index and a
// file-backed paged index (fixed-width binary records, see FileStore).

#include <atomic>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "provql/model.hpp"

namespace provql {

// Time filter pushed down into adjacency fetches.
//   StartBefore(t): starttime < t
//   EndAfter(t):    endtime > t
//   Window(t1,t2):  a half-open window on the index's sort key, used to
//                   fetch only the delta when a traversal bound relaxes.
//                   On incoming(): t1 <= starttime < t2.
//                   On outgoing(): t1 < endtime <= t2.
struct TimePredicate {
  enum class Kind { All, StartBefore, EndAfter, Window };
  Kind kind = Kind::All;
  TimestampNs t1 = 0;
  TimestampNs t2 = 0;

  static TimePredicate all() { return {}; }
  static TimePredicate start_before(TimestampNs t) { return {Kind::StartBefore, t, 0}; }
  static TimePredicate end_after(TimestampNs t) { return {Kind::EndAfter, t, 0}; }
  static TimePredicate window(TimestampNs a, TimestampNs b) { return {Kind::Window, a, b}; }
};

// Attribute constraints on one endpoint of an event pattern.
struct EndpointPattern {
  std::optional<EntityKind> kind;
  // attr name -> required value; names follow the query property keys
  // (name, path, pid, hostid, srcip, srcport, dstip, dstport).
  std::map<std::string, std::string> attrs;

  bool empty() const { return !kind && attrs.empty(); }
};

struct EventPattern {
  std::optional<EventId> id;
  std::optional<OpType> optype;
  std::optional<std::string> host_id;
  EndpointPattern src;
  EndpointPattern dst;
};

struct ImportStats {
  std::uint64_t accepted = 0;          // events indexed
  std::uint64_t rejected = 0;          // events refused (with reasons)
  std::uint64_t merged_entities = 0;   // entity keys that already existed
  std::uint64_t new_entities = 0;
  std::vector<std::string> rejection_reasons;

  ImportStats& operator+=(const ImportStats& o);
};

class EventStore {
 public:
  virtual ~EventStore() = default;

  // Interns entities (by key) and indexes valid events. Valid records of a
  // batch are applied together; an I/O failure applies none of them.
  // Invalid records (bad times, unknown endpoints, duplicate event ids) are
  // counted in `rejected` with a reason, never silently dropped.
  virtual ImportStats insert_batch(const std::vector<Entity>& entities,
                                   const std::vector<Event>& events) = 0;

  // Events with dst == v satisfying p, in starttime order. Unknown node
  // yields the empty list. Cost is proportional to matches plus a bounded
  // per-node overhead, never to the store size.
  virtual std::vector<Event> incoming(EntityId v, const TimePredicate& p) const = 0;

  // Mirror of incoming: events with src == u, in endtime-descending order.
  virtual std::vector<Event> outgoing(EntityId u, const TimePredicate& p) const = 0;

  // All events matching every bound field of the pattern, ordered by id.
  virtual std::vector<Event> find_events(const EventPattern& pattern) const = 0;

  virtual std::optional<Entity> entity_by_id(EntityId id) const = 0;
  virtual std::optional<EntityId> entity_id_by_key(const EntityKey& key) const = 0;
  virtual std::vector<Entity> all_entities() const = 0;

  virtual std::uint64_t event_count() const = 0;
  virtual std::uint64_t entity_count() const = 0;

  // Full scan in event-id order; audit/debug only (tests, dumps).
  virtual std::vector<Event> audit_all_events() const = 0;

  // Monotone counter of events yielded by incoming/outgoing/find_events.
  std::uint64_t fetch_count() const { return fetched_.load(std::memory_order_relaxed); }
  void reset_fetch_count() const { fetched_.store(0, std::memory_order_relaxed); }

 protected:
  void count_fetch(std::uint64_t n) const { fetched_.fetch_add(n, std::memory_order_relaxed); }
  mutable std::atomic<std::uint64_t> fetched_{0};
};

bool event_matches(const Event& e, const TimePredicate& p, bool incoming_side);
bool endpoint_matches(const Entity& ent, const EndpointPattern& p);

// ---------------------------------------------------------------------------

// Shared entity interning and pattern support for both store variants.
class EntityTable {
 public:
  // Returns (id, was_new). Attributes of re-imported keys are merged in.
  std::pair<EntityId, bool> intern(const EntityKey& key,
                                   const std::map<std::string, std::string>& attrs);
  std::optional<Entity> by_id(EntityId id) const;
  std::optional<EntityId> id_by_key(const EntityKey& key) const;
  std::vector<Entity> all() const;
  std::uint64_t size() const { return entities_.size(); }

  // Entity ids whose attributes satisfy the pattern. When an indexable
  // attribute is bound the candidate set comes from the attribute index;
  // remaining constraints are checked per candidate.
  std::vector<EntityId> find(const EndpointPattern& p) const;

  bool known(EntityId id) const { return id < entities_.size(); }

 private:
  std::vector<Entity> entities_;  // id == index
  std::unordered_map<EntityKey, EntityId, EntityKeyHash> by_key_;
  // (attr-name, value) -> ids; covers exactly the pattern-usable attributes.
  std::unordered_map<std::string, std::vector<EntityId>> attr_index_;
};

// Canonical per-entity attribute map used by patterns and exports.
std::map<std::string, std::string> pattern_attrs(const Entity& e);

// ---------------------------------------------------------------------------

class MemoryStore : public EventStore {
 public:
  ImportStats insert_batch(const std::vector<Entity>& entities,
                           const std::vector<Event>& events) override;
  std::vector<Event> incoming(EntityId v, const TimePredicate& p) const override;
  std::vector<Event> outgoing(EntityId u, const TimePredicate& p) const override;
  std::vector<Event> find_events(const EventPattern& pattern) const override;
  std::optional<Entity> entity_by_id(EntityId id) const override;
  std::optional<EntityId> entity_id_by_key(const EntityKey& key) const override;
  std::vector<Entity> all_entities() const override;
  std::uint64_t event_count() const override { return by_id_.size(); }
  std::uint64_t entity_count() const override { return entities_.size(); }
  std::vector<Event> audit_all_events() const override;

 private:
  EntityTable entities_;
  std::unordered_map<EventId, Event> by_id_;
  std::unordered_map<EntityId, std::vector<Event>> in_index_;   // starttime asc
  std::unordered_map<EntityId, std::vector<Event>> out_index_;  // endtime desc
};

// ---------------------------------------------------------------------------

// File-backed variant. A store is a directory holding two record files plus
// the entity table:
//   events_by_dst.pvqs  records sorted by (dst, starttime)
//   events_by_src.pvqs  records sorted by (src, endtime desc)
//   entities.jsonl      one entity per line (import schema)
//
// Record file layout (little-endian):
//   header: magic "PVQS", version u16, record count u64
//   record: id u64, src u64, dst u64, optype u8, start i64, end i64,
//           amount u64, host-id offset u32           (53 bytes)
//   footer: host table size u32, then NUL-terminated host strings; the
//           record field is an offset into this table.
//
// Reads go through a sparse in-memory offset directory (node -> record
// range) built once at open; event payloads are fetched from disk per
// block, so a traversal touches only the blocks of its frontier nodes.
class FileStore : public EventStore {
 public:
  static constexpr std::uint16_t kFormatVersion = 1;
  static constexpr std::size_t kRecordSize = 53;

  // Opens (or creates) the store directory.
  explicit FileStore(const std::string& dir);
  ~FileStore() override;

  FileStore(const FileStore&) = delete;
  FileStore& operator=(const FileStore&) = delete;

  ImportStats insert_batch(const std::vector<Entity>& entities,
                           const std::vector<Event>& events) override;
  std::vector<Event> incoming(EntityId v, const TimePredicate& p) const override;
  std::vector<Event> outgoing(EntityId u, const TimePredicate& p) const override;
  std::vector<Event> find_events(const EventPattern& pattern) const override;
  std::optional<Entity> entity_by_id(EntityId id) const override;
  std::optional<EntityId> entity_id_by_key(const EntityKey& key) const override;
  std::vector<Entity> all_entities() const override;
  std::uint64_t event_count() const override { return record_count_; }
  std::uint64_t entity_count() const override { return entities_.size(); }
  std::vector<Event> audit_all_events() const override;

 private:
  struct Range {
    std::uint64_t first = 0;
    std::uint64_t count = 0;
  };

  void load();
  void reopen_readers();
  Event read_record(std::FILE* f, std::uint64_t index) const;
  std::vector<Event> read_block(std::FILE* f, const Range& r) const;

  std::string dir_;
  EntityTable entities_;
  std::uint64_t record_count_ = 0;
  std::unordered_map<EntityId, Range> dst_dir_;  // into events_by_dst
  std::unordered_map<EntityId, Range> src_dir_;  // into events_by_src
  std::unordered_map<EventId, std::uint64_t> id_dir_;  // id -> index in by_dst
  std::vector<std::string> host_table_;
  std::unordered_map<std::string, std::uint32_t> host_offsets_;
  std::FILE* by_dst_ = nullptr;
  std::FILE* by_src_ = nullptr;
};

std::unique_ptr<EventStore> open_store(const std::string& path, const std::string& variant);

}  // namespace provql
