#include "provql/importer.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <sstream>

#include "provql/json_io.hpp"

namespace provql {

using nlohmann::json;

std::variant<LogRecord, LineParseError> parse_log_line(const std::string& line) {
  json j = json::parse(line, nullptr, false);
  if (j.is_discarded()) return LineParseError{0, "bad JSON"};
  if (!j.is_object()) return LineParseError{0, "record is not an object"};
  auto type_it = j.find("type");
  if (type_it == j.end() || !type_it->is_string())
    return LineParseError{0, "missing field: type"};
  const std::string type = type_it->get<std::string>();
  try {
    if (type == "entity") {
      EntityRecord r;
      r.key = entity_key_from_json(j);
      if (auto it = j.find("attrs"); it != j.end() && it->is_object())
        r.attrs = it->get<std::map<std::string, std::string>>();
      auto key_problems = r.key.validate();
      if (!key_problems.empty()) return LineParseError{0, key_problems.front()};
      return LogRecord{std::move(r)};
    }
    if (type == "event") {
      EventRecord r;
      auto need = [&](const char* f) -> const json& {
        auto it = j.find(f);
        if (it == j.end()) throw std::runtime_error(std::string("missing field: ") + f);
        return *it;
      };
      if (!need("id").is_number_unsigned()) throw std::runtime_error("bad field: id");
      r.id = j["id"].get<std::uint64_t>();
      auto op_s = need("op").get<std::string>();
      auto op = optype_from_string(op_s);
      if (!op) throw std::runtime_error("unknown op: " + op_s);
      r.optype = *op;
      r.src_key = entity_key_from_json(need("src"));
      r.dst_key = entity_key_from_json(need("dst"));
      if (!need("start").is_number_integer() && !need("start").is_number_unsigned())
        throw std::runtime_error("bad field: start");
      r.start = j["start"].get<TimestampNs>();
      r.end = need("end").get<TimestampNs>();
      r.amount = j.value("amount", std::uint64_t{0});
      r.host_id = j.value("host", r.src_key.host_id);
      return LogRecord{std::move(r)};
    }
  } catch (const std::exception& ex) {
    return LineParseError{0, ex.what()};
  }
  return LineParseError{0, "unknown record type: " + type};
}

namespace {

// Accumulates one batch and flushes it through EventStore::insert_batch.
class BatchBuffer {
 public:
  BatchBuffer(EventStore& store, FileImportStats& stats, std::size_t batch_size)
      : store_(store), stats_(stats), batch_size_(batch_size) {}

  void add(const EntityRecord& r) {
    Entity e;
    e.key = r.key;
    e.attrs = r.attrs;
    entities_.push_back(std::move(e));
    declared_.insert(r.key);
    maybe_flush();
  }

  void add(const EventRecord& r) {
    // Auto-create endpoints that were never declared; audit logs interleave
    // entity and event records in practice.
    for (const EntityKey* k : {&r.src_key, &r.dst_key}) {
      if (!declared_.count(*k) && !store_.entity_id_by_key(*k)) {
        Entity e;
        e.key = *k;
        entities_.push_back(std::move(e));
        declared_.insert(*k);
        stats_.auto_created_entities++;
      }
    }
    pending_events_.push_back(r);
    maybe_flush();
  }

  void flush() {
    if (entities_.empty() && pending_events_.empty()) return;
    // Resolve keys after the store has interned this batch's entities.
    auto batch_entities = std::move(entities_);
    entities_.clear();
    ImportStats s1 = store_.insert_batch(batch_entities, {});
    std::vector<Event> events;
    events.reserve(pending_events_.size());
    for (const auto& r : pending_events_) {
      Event ev;
      ev.id = r.id;
      auto src = store_.entity_id_by_key(r.src_key);
      auto dst = store_.entity_id_by_key(r.dst_key);
      // A missing endpoint id at this point means its key failed
      // validation; insert_batch rejects the event with a reason.
      ev.src = src.value_or(std::numeric_limits<EntityId>::max());
      ev.dst = dst.value_or(std::numeric_limits<EntityId>::max());
      ev.optype = r.optype;
      ev.starttime = r.start;
      ev.endtime = r.end;
      ev.amount = r.amount;
      ev.host_id = r.host_id;
      events.push_back(std::move(ev));
    }
    pending_events_.clear();
    ImportStats s2 = store_.insert_batch({}, events);
    for (const auto& reason : s2.rejection_reasons)
      if (reason.find("duplicate") != std::string::npos) stats_.duplicate_ids++;
    stats_.store += s1;
    stats_.store += s2;
  }

 private:
  void maybe_flush() {
    if (entities_.size() + pending_events_.size() >= batch_size_) flush();
  }

  EventStore& store_;
  FileImportStats& stats_;
  std::size_t batch_size_;
  std::vector<Entity> entities_;
  std::vector<EventRecord> pending_events_;
  std::unordered_set<EntityKey, EntityKeyHash> declared_;
};

}  // namespace

ImportResult import_stream(std::istream& in, EventStore& store, const ImportOptions& opts) {
  ImportResult result;
  BatchBuffer buffer(store, result.stats, opts.batch_size);
  std::string line;
  std::uint64_t line_no = 0;
  try {
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      auto parsed = parse_log_line(line);
      if (auto* err = std::get_if<LineParseError>(&parsed)) {
        err->line_no = line_no;
        result.stats.parse_errors++;
        if (result.stats.errors.size() < opts.max_logged_errors)
          result.stats.errors.push_back(*err);
        continue;
      }
      std::visit([&](const auto& rec) { buffer.add(rec); }, std::get<LogRecord>(parsed));
    }
    buffer.flush();
  } catch (const std::exception& ex) {
    result.ok = false;
    result.error = ex.what();
  }
  if (in.bad()) {
    result.ok = false;
    result.error = "I/O error while reading input";
  }
  return result;
}

ImportResult import_file(const std::string& path, EventStore& store, const ImportOptions& opts) {
  std::ifstream in(path);
  if (!in) {
    ImportResult r;
    r.ok = false;
    r.error = "cannot open " + path;
    return r;
  }
  return import_stream(in, store, opts);
}

void dump_store(const EventStore& store, std::ostream& out) {
  auto entities = store.all_entities();
  std::sort(entities.begin(), entities.end(),
            [](const Entity& a, const Entity& b) { return a.key < b.key; });
  for (const auto& e : entities) out << entity_to_json(e).dump() << "\n";
  for (const auto& ev : store.audit_all_events()) {
    json j;
    j["type"] = "event";
    j["id"] = ev.id;
    j["op"] = to_string(ev.optype);
    auto src = store.entity_by_id(ev.src);
    auto dst = store.entity_by_id(ev.dst);
    j["src"] = src ? entity_key_to_json(src->key) : json();
    j["dst"] = dst ? entity_key_to_json(dst->key) : json();
    j["start"] = ev.starttime;
    j["end"] = ev.endtime;
    j["amount"] = ev.amount;
    j["host"] = ev.host_id;
    out << j.dump() << "\n";
  }
}

std::string dump_store_string(const EventStore& store) {
  std::ostringstream os;
  dump_store(store, os);
  return os.str();
}

}  // namespace provql
