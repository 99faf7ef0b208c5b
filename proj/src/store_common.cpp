#include <algorithm>
#include <stdexcept>

#include "provql/store.hpp"

namespace provql {

ImportStats& ImportStats::operator+=(const ImportStats& o) {
  accepted += o.accepted;
  rejected += o.rejected;
  merged_entities += o.merged_entities;
  new_entities += o.new_entities;
  rejection_reasons.insert(rejection_reasons.end(), o.rejection_reasons.begin(),
                           o.rejection_reasons.end());
  return *this;
}

bool event_matches(const Event& e, const TimePredicate& p, bool incoming_side) {
  switch (p.kind) {
    case TimePredicate::Kind::All: return true;
    case TimePredicate::Kind::StartBefore: return e.starttime < p.t1;
    case TimePredicate::Kind::EndAfter: return e.endtime > p.t1;
    case TimePredicate::Kind::Window:
      return incoming_side ? (e.starttime >= p.t1 && e.starttime < p.t2)
                           : (e.endtime > p.t1 && e.endtime <= p.t2);
  }
  return false;
}

// Canonical attribute names per kind: File "path"; Process "name"/"pid";
// Network "srcip"/"srcport"/"dstip"/"dstport". "name" on a file pattern is
// an alias for "path" (the query texts use name for file paths).
static std::string canonical_attr(EntityKind kind, const std::string& attr) {
  if (kind == EntityKind::File && attr == "name") return "path";
  if (kind == EntityKind::Network) {
    if (attr == "src_ip") return "srcip";
    if (attr == "dst_ip") return "dstip";
    if (attr == "src_port") return "srcport";
    if (attr == "dst_port") return "dstport";
  }
  return attr;
}

std::map<std::string, std::string> pattern_attrs(const Entity& e) {
  std::map<std::string, std::string> m = e.attrs;
  m["hostid"] = e.key.host_id;
  m["kind"] = to_string(e.key.kind);
  switch (e.key.kind) {
    case EntityKind::File:
      m["path"] = e.key.path;
      break;
    case EntityKind::Process:
      m["name"] = e.key.name;
      m["pid"] = std::to_string(e.key.pid);
      break;
    case EntityKind::Network:
      m["srcip"] = e.key.src_ip;
      m["srcport"] = std::to_string(e.key.src_port);
      m["dstip"] = e.key.dst_ip;
      m["dstport"] = std::to_string(e.key.dst_port);
      break;
  }
  return m;
}

bool endpoint_matches(const Entity& ent, const EndpointPattern& p) {
  if (p.kind && ent.key.kind != *p.kind) return false;
  if (p.attrs.empty()) return true;
  auto attrs = pattern_attrs(ent);
  for (const auto& [k, v] : p.attrs) {
    auto canon = canonical_attr(ent.key.kind, k);
    auto it = attrs.find(canon);
    if (it == attrs.end() || it->second != v) return false;
  }
  return true;
}

// --- EntityTable -----------------------------------------------------------

static const char* kIndexedAttrs[] = {"path", "name", "pid", "srcip", "srcport", "dstip", "dstport"};

static std::string index_key(EntityKind kind, const std::string& attr, const std::string& value) {
  std::string s = to_string(kind);
  s += '|';
  s += attr;
  s += '|';
  s += value;
  return s;
}

std::pair<EntityId, bool> EntityTable::intern(const EntityKey& key,
                                              const std::map<std::string, std::string>& attrs) {
  auto it = by_key_.find(key);
  if (it != by_key_.end()) {
    auto& existing = entities_[it->second];
    for (const auto& [k, v] : attrs) existing.attrs.emplace(k, v);
    return {it->second, false};
  }
  EntityId id = entities_.size();
  Entity e;
  e.id = id;
  e.key = key;
  e.attrs = attrs;
  entities_.push_back(std::move(e));
  by_key_.emplace(key, id);
  auto pat = pattern_attrs(entities_.back());
  for (const char* a : kIndexedAttrs) {
    auto f = pat.find(a);
    if (f != pat.end()) attr_index_[index_key(key.kind, a, f->second)].push_back(id);
  }
  return {id, true};
}

std::optional<Entity> EntityTable::by_id(EntityId id) const {
  if (id >= entities_.size()) return std::nullopt;
  return entities_[id];
}

std::optional<EntityId> EntityTable::id_by_key(const EntityKey& key) const {
  auto it = by_key_.find(key);
  if (it == by_key_.end()) return std::nullopt;
  return it->second;
}

std::vector<Entity> EntityTable::all() const { return entities_; }

std::vector<EntityId> EntityTable::find(const EndpointPattern& p) const {
  // Use the attribute index when possible; otherwise scan the (small)
  // entity table and filter.
  if (p.kind) {
    for (const char* a : kIndexedAttrs) {
      auto f = p.attrs.find(a);
      if (f == p.attrs.end() && std::string(a) == "path") f = p.attrs.find("name");
      if (f == p.attrs.end()) continue;
      auto canon = canonical_attr(*p.kind, f->first);
      if (canon != a) continue;
      auto hit = attr_index_.find(index_key(*p.kind, a, f->second));
      std::vector<EntityId> out;
      if (hit != attr_index_.end()) {
        for (EntityId id : hit->second)
          if (endpoint_matches(entities_[id], p)) out.push_back(id);
      }
      return out;
    }
  }
  std::vector<EntityId> out;
  for (const auto& e : entities_)
    if (endpoint_matches(e, p)) out.push_back(e.id);
  return out;
}

// --- MemoryStore -----------------------------------------------------------

static bool in_order(const Event& a, const Event& b) {
  return a.starttime != b.starttime ? a.starttime < b.starttime : a.id < b.id;
}
static bool out_order(const Event& a, const Event& b) {
  return a.endtime != b.endtime ? a.endtime > b.endtime : a.id < b.id;
}

ImportStats MemoryStore::insert_batch(const std::vector<Entity>& entities,
                                      const std::vector<Event>& events) {
  ImportStats stats;
  std::unordered_set<EntityId> known;
  for (const auto& ent : entities) {
    auto key_problems = ent.key.validate();
    if (!key_problems.empty()) {
      stats.rejected++;
      stats.rejection_reasons.push_back("entity: " + key_problems.front());
      continue;
    }
    auto [id, fresh] = entities_.intern(ent.key, ent.attrs);
    (void)id;
    fresh ? stats.new_entities++ : stats.merged_entities++;
  }
  known.reserve(entities_.size());
  for (EntityId i = 0; i < entities_.size(); ++i) known.insert(i);

  std::vector<Event> accepted;
  std::unordered_set<EventId> batch_ids;
  for (const auto& ev : events) {
    auto violations = validate_event(ev, known);
    if (by_id_.count(ev.id) || batch_ids.count(ev.id)) violations.push_back("duplicate event id");
    if (!violations.empty()) {
      stats.rejected++;
      std::string r = "event " + std::to_string(ev.id) + ":";
      for (const auto& v : violations) r += " " + v;
      stats.rejection_reasons.push_back(r);
      continue;
    }
    batch_ids.insert(ev.id);
    accepted.push_back(ev);
  }

  std::unordered_set<EntityId> touched_in, touched_out;
  for (const auto& ev : accepted) {
    by_id_.emplace(ev.id, ev);
    in_index_[ev.dst].push_back(ev);
    out_index_[ev.src].push_back(ev);
    touched_in.insert(ev.dst);
    touched_out.insert(ev.src);
    stats.accepted++;
  }
  for (EntityId v : touched_in) std::sort(in_index_[v].begin(), in_index_[v].end(), in_order);
  for (EntityId u : touched_out) std::sort(out_index_[u].begin(), out_index_[u].end(), out_order);
  return stats;
}

// Scans the sorted prefix that can match, then filters.
static std::vector<Event> filter_sorted(const std::vector<Event>& sorted, const TimePredicate& p,
                                        bool incoming_side) {
  std::vector<Event> out;
  if (incoming_side) {
    std::size_t hi = sorted.size();
    std::size_t lo = 0;
    if (p.kind == TimePredicate::Kind::StartBefore) {
      hi = std::partition_point(sorted.begin(), sorted.end(),
                                [&](const Event& e) { return e.starttime < p.t1; }) -
           sorted.begin();
    } else if (p.kind == TimePredicate::Kind::Window) {
      lo = std::partition_point(sorted.begin(), sorted.end(),
                                [&](const Event& e) { return e.starttime < p.t1; }) -
           sorted.begin();
      hi = std::partition_point(sorted.begin(), sorted.end(),
                                [&](const Event& e) { return e.starttime < p.t2; }) -
           sorted.begin();
    }
    for (std::size_t i = lo; i < hi; ++i)
      if (event_matches(sorted[i], p, true)) out.push_back(sorted[i]);
  } else {
    std::size_t hi = sorted.size();
    std::size_t lo = 0;
    if (p.kind == TimePredicate::Kind::EndAfter) {
      hi = std::partition_point(sorted.begin(), sorted.end(),
                                [&](const Event& e) { return e.endtime > p.t1; }) -
           sorted.begin();
    } else if (p.kind == TimePredicate::Kind::Window) {
      lo = std::partition_point(sorted.begin(), sorted.end(),
                                [&](const Event& e) { return e.endtime > p.t2; }) -
           sorted.begin();
      hi = std::partition_point(sorted.begin(), sorted.end(),
                                [&](const Event& e) { return e.endtime > p.t1; }) -
           sorted.begin();
    }
    for (std::size_t i = lo; i < hi; ++i)
      if (event_matches(sorted[i], p, false)) out.push_back(sorted[i]);
  }
  return out;
}

std::vector<Event> MemoryStore::incoming(EntityId v, const TimePredicate& p) const {
  auto it = in_index_.find(v);
  if (it == in_index_.end()) return {};
  auto out = filter_sorted(it->second, p, true);
  count_fetch(out.size());
  return out;
}

std::vector<Event> MemoryStore::outgoing(EntityId u, const TimePredicate& p) const {
  auto it = out_index_.find(u);
  if (it == out_index_.end()) return {};
  auto out = filter_sorted(it->second, p, false);
  count_fetch(out.size());
  return out;
}

std::vector<Event> MemoryStore::find_events(const EventPattern& pattern) const {
  std::vector<Event> out;
  auto full_match = [&](const Event& e) {
    if (pattern.id && e.id != *pattern.id) return false;
    if (pattern.optype && e.optype != *pattern.optype) return false;
    if (pattern.host_id && e.host_id != *pattern.host_id) return false;
    if (!pattern.src.empty()) {
      auto ent = entities_.by_id(e.src);
      if (!ent || !endpoint_matches(*ent, pattern.src)) return false;
    }
    if (!pattern.dst.empty()) {
      auto ent = entities_.by_id(e.dst);
      if (!ent || !endpoint_matches(*ent, pattern.dst)) return false;
    }
    return true;
  };

  if (pattern.id) {
    auto it = by_id_.find(*pattern.id);
    if (it != by_id_.end() && full_match(it->second)) out.push_back(it->second);
  } else if (!pattern.dst.empty()) {
    for (EntityId v : entities_.find(pattern.dst)) {
      auto it = in_index_.find(v);
      if (it == in_index_.end()) continue;
      for (const auto& e : it->second)
        if (full_match(e)) out.push_back(e);
    }
  } else if (!pattern.src.empty()) {
    for (EntityId u : entities_.find(pattern.src)) {
      auto it = out_index_.find(u);
      if (it == out_index_.end()) continue;
      for (const auto& e : it->second)
        if (full_match(e)) out.push_back(e);
    }
  } else {
    for (const auto& [id, e] : by_id_)
      if (full_match(e)) out.push_back(e);
  }
  std::sort(out.begin(), out.end(), [](const Event& a, const Event& b) { return a.id < b.id; });
  count_fetch(out.size());
  return out;
}

std::optional<Entity> MemoryStore::entity_by_id(EntityId id) const { return entities_.by_id(id); }

std::optional<EntityId> MemoryStore::entity_id_by_key(const EntityKey& key) const {
  return entities_.id_by_key(key);
}

std::vector<Entity> MemoryStore::all_entities() const { return entities_.all(); }

std::vector<Event> MemoryStore::audit_all_events() const {
  std::vector<Event> out;
  out.reserve(by_id_.size());
  for (const auto& [id, e] : by_id_) out.push_back(e);
  std::sort(out.begin(), out.end(), [](const Event& a, const Event& b) { return a.id < b.id; });
  return out;
}

std::unique_ptr<EventStore> open_store(const std::string& path, const std::string& variant) {
  if (variant == "memory") return std::make_unique<MemoryStore>();
  if (variant == "file") return std::make_unique<FileStore>(path);
  throw std::runtime_error("unknown store variant: " + variant);
}

}  // namespace provql
