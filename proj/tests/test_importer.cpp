#include <doctest.h>

#include <chrono>
#include <sstream>

#include "helpers.hpp"
#include "provql/importer.hpp"

using namespace provql;
using namespace provql::testing;

namespace {

std::string event_line(EventId id, const char* op, const std::string& src, const std::string& dst,
                       TimestampNs s, TimestampNs e, std::uint64_t amount) {
  std::ostringstream os;
  os << R"({"type":"event","id":)" << id << R"(,"op":")" << op << R"(","src":)" << src
     << R"(,"dst":)" << dst << R"(,"start":)" << s << R"(,"end":)" << e << R"(,"amount":)"
     << amount << "}";
  return os.str();
}

const char* kProc = R"({"kind":"process","host":"1","pid":42,"name":"bash"})";
const char* kFile = R"({"kind":"file","host":"1","path":"/tmp/x"})";

}  // namespace

TEST_CASE("parse_log_line reads an event record") {
  auto line = event_line(1, "write", kProc, kFile, 100, 110, 64);
  auto r = parse_log_line(line);
  auto* rec = std::get_if<LogRecord>(&r);
  REQUIRE(rec != nullptr);
  auto* ev = std::get_if<EventRecord>(rec);
  REQUIRE(ev != nullptr);
  CHECK(ev->id == 1);
  CHECK(ev->optype == OpType::Write);
  CHECK(ev->src_key.kind == EntityKind::Process);
  CHECK(ev->src_key.pid == 42);
  CHECK(ev->dst_key.path == "/tmp/x");
  CHECK(ev->start == 100);
  CHECK(ev->end == 110);
  CHECK(ev->amount == 64);
  CHECK(ev->host_id == "1");  // defaulted from the source key
}

TEST_CASE("parse_log_line reads a network entity record") {
  auto r = parse_log_line(
      R"({"type":"entity","kind":"network","host":"2","src_ip":"192.168.1.128","src_port":4444,"dst_ip":"192.168.1.131","dst_port":80})");
  auto* rec = std::get_if<LogRecord>(&r);
  REQUIRE(rec != nullptr);
  auto* ent = std::get_if<EntityRecord>(rec);
  REQUIRE(ent != nullptr);
  CHECK(ent->key.kind == EntityKind::Network);
  CHECK(ent->key.src_ip == "192.168.1.128");
  CHECK(ent->key.dst_port == 80);
}

TEST_CASE("parse_log_line rejects junk with a reason") {
  auto r = parse_log_line("not json");
  auto* err = std::get_if<LineParseError>(&r);
  REQUIRE(err != nullptr);
  CHECK(err->reason == "bad JSON");

  auto r2 = parse_log_line(R"({"type":"event","id":1})");
  CHECK(std::get_if<LineParseError>(&r2) != nullptr);

  auto r3 = parse_log_line(R"({"type":"entity","kind":"submarine","host":"1"})");
  CHECK(std::get_if<LineParseError>(&r3) != nullptr);

  auto r4 = parse_log_line(
      R"({"type":"event","id":2,"op":"teleport","src":{"kind":"file","host":"1","path":"/a"},"dst":{"kind":"file","host":"1","path":"/b"},"start":1,"end":2})");
  auto* err4 = std::get_if<LineParseError>(&r4);
  REQUIRE(err4 != nullptr);
  CHECK(err4->reason.find("teleport") != std::string::npos);
}

TEST_CASE("import_stream loads entities and events") {
  std::ostringstream log;
  log << R"({"type":"entity","kind":"process","host":"1","pid":42,"name":"bash"})" << "\n";
  log << R"({"type":"entity","kind":"file","host":"1","path":"/tmp/x"})" << "\n";
  for (int i = 0; i < 10; ++i)
    log << event_line(i + 1, "write", kProc, kFile, 100 + i, 110 + i, 64) << "\n";
  std::istringstream in(log.str());
  MemoryStore store;
  auto r = import_stream(in, store);
  CHECK(r.ok);
  CHECK(r.stats.store.accepted == 10);
  CHECK(store.entity_count() == 2);
}

TEST_CASE("events auto-create never-declared entities") {
  std::istringstream in(event_line(1, "write", kProc, kFile, 1, 2, 8) + "\n");
  MemoryStore store;
  auto r = import_stream(in, store);
  CHECK(r.ok);
  CHECK(r.stats.store.accepted == 1);
  CHECK(r.stats.auto_created_entities == 2);
  CHECK(store.entity_id_by_key(EntityKey::file("1", "/tmp/x")).has_value());
}

TEST_CASE("re-importing the same file is idempotent") {
  std::string log = event_line(1, "write", kProc, kFile, 1, 2, 8) + "\n" +
                    event_line(2, "read", kFile, kProc, 3, 4, 8) + "\n";
  MemoryStore store;
  {
    std::istringstream in(log);
    import_stream(in, store);
  }
  auto before = dump_store_string(store);
  std::istringstream in2(log);
  auto r = import_stream(in2, store);
  CHECK(r.ok);
  CHECK(r.stats.store.accepted == 0);
  CHECK(r.stats.duplicate_ids == 2);
  CHECK(dump_store_string(store) == before);
}

TEST_CASE("dump and re-import reproduce the store") {
  auto b = random_store(31, 20, 200);
  MemoryStore original;
  b.load_into(original);
  auto dumped = dump_store_string(original);

  MemoryStore copy;
  std::istringstream in(dumped);
  auto r = import_stream(in, copy);
  CHECK(r.ok);
  CHECK(r.stats.store.accepted == 200);
  // Equality modulo surrogate-id order: dumps are key-sorted.
  CHECK(dump_store_string(copy) == dumped);
}

TEST_CASE("parse errors carry line numbers and do not abort the import") {
  std::string log = event_line(1, "write", kProc, kFile, 1, 2, 8) + "\n" + "garbage\n" +
                    event_line(2, "read", kFile, kProc, 3, 4, 8) + "\n";
  std::istringstream in(log);
  MemoryStore store;
  auto r = import_stream(in, store);
  CHECK(r.ok);
  CHECK(r.stats.parse_errors == 1);
  REQUIRE(r.stats.errors.size() == 1);
  CHECK(r.stats.errors[0].line_no == 2);
  CHECK(r.stats.store.accepted == 2);
}

TEST_CASE("import time grows roughly linearly with file size") {
  auto build_log = [](std::size_t n) {
    std::ostringstream os;
    for (std::size_t i = 0; i < n; ++i) {
      std::string src = R"({"kind":"process","host":"1","pid":)" + std::to_string(i % 97) +
                        R"(,"name":"w"})";
      std::string dst = R"({"kind":"file","host":"1","path":"/t/)" + std::to_string(i % 211) +
                        R"("})";
      os << event_line(i + 1, "write", src, dst, i, i + 1, 1) << "\n";
    }
    return os.str();
  };
  auto time_import = [&](const std::string& log) {
    MemoryStore store;
    std::istringstream in(log);
    auto t0 = std::chrono::steady_clock::now();
    auto r = import_stream(in, store);
    REQUIRE(r.ok);
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };
  auto small = build_log(2000);
  auto large = build_log(20000);
  // Warm up, then compare: 10x the records should stay within 15x the time.
  time_import(small);
  double t_small = time_import(small);
  double t_large = time_import(large);
  CHECK(t_large <= 15.0 * std::max(t_small, 1e-4));
}
