#pragma once

// Normalized JSONL ingestion. One record per line:
//
//   {"type":"entity","kind":"file","host":"1","path":"/tmp/x"}
//   {"type":"event","id":1,"op":"write",
//    "src":{"kind":"process","host":"1","pid":42,"name":"bash"},
//    "dst":{"kind":"file","host":"1","path":"/tmp/x"},
//    "start":100,"end":110,"amount":64,"host":"1"}
//
// Events reference entities by key; keys are resolved (and entities
// auto-created when never declared) at import time. The event "host" field
// is optional and defaults to the source entity's host.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "provql/model.hpp"
#include "provql/store.hpp"

namespace provql {

struct EntityRecord {
  EntityKey key;
  std::map<std::string, std::string> attrs;
};

struct EventRecord {
  EventId id = 0;
  EntityKey src_key;
  EntityKey dst_key;
  OpType optype = OpType::Read;
  TimestampNs start = 0;
  TimestampNs end = 0;
  std::uint64_t amount = 0;
  std::string host_id;  // empty -> src host
};

using LogRecord = std::variant<EntityRecord, EventRecord>;

struct LineParseError {
  std::uint64_t line_no = 0;  // filled by the file importer
  std::string reason;
};

// Parses one JSONL line. Total: malformed input comes back as an error,
// never an exception.
std::variant<LogRecord, LineParseError> parse_log_line(const std::string& line);

struct FileImportStats {
  ImportStats store;           // accepted/rejected/merged from the store
  std::uint64_t parse_errors = 0;
  std::uint64_t duplicate_ids = 0;  // subset of store.rejected
  std::uint64_t auto_created_entities = 0;
  std::vector<LineParseError> errors;  // first few, for diagnostics
};

struct ImportOptions {
  std::size_t batch_size = 10000;
  std::size_t max_logged_errors = 20;
};

// Streams `path` into the store in batches. Entities referenced only by
// events are created from their key fields. Duplicate event ids are
// skipped and counted. An I/O error aborts with the stats accumulated so
// far carried inside the exception-free result (ok == false).
struct ImportResult {
  bool ok = true;
  std::string error;
  FileImportStats stats;
};

ImportResult import_file(const std::string& path, EventStore& store,
                         const ImportOptions& opts = {});
ImportResult import_stream(std::istream& in, EventStore& store, const ImportOptions& opts = {});

// Debug dump of a store in the import schema; re-importing the dump
// reproduces the same store modulo surrogate-id assignment order.
void dump_store(const EventStore& store, std::ostream& out);
std::string dump_store_string(const EventStore& store);

}  // namespace provql
