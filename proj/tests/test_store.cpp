#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "helpers.hpp"
#include "provql/store.hpp"

using namespace provql;
using namespace provql::testing;

namespace {

std::string temp_dir(const char* tag) {
  auto dir = std::filesystem::temp_directory_path() /
             (std::string("provql_store_") + tag + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  return dir.string();
}

// Brute-force reference for incoming/outgoing over the full event list.
std::vector<Event> scan_incoming(const EventStore& s, EntityId v, const TimePredicate& p) {
  std::vector<Event> out;
  for (const auto& e : s.audit_all_events())
    if (e.dst == v && event_matches(e, p, true)) out.push_back(e);
  std::sort(out.begin(), out.end(), [](const Event& a, const Event& b) {
    return a.starttime != b.starttime ? a.starttime < b.starttime : a.id < b.id;
  });
  return out;
}

std::vector<Event> scan_outgoing(const EventStore& s, EntityId u, const TimePredicate& p) {
  std::vector<Event> out;
  for (const auto& e : s.audit_all_events())
    if (e.src == u && event_matches(e, p, false)) out.push_back(e);
  std::sort(out.begin(), out.end(), [](const Event& a, const Event& b) {
    return a.endtime != b.endtime ? a.endtime > b.endtime : a.id < b.id;
  });
  return out;
}

bool same_events(const std::vector<Event>& a, const std::vector<Event>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!(a[i] == b[i])) return false;
  return true;
}

}  // namespace

TEST_CASE("insert_batch counts a clean batch") {
  MemoryStore store;
  StoreBuilder b;
  auto p = b.process("1", 1, "a");
  auto f = b.file("1", "/x");
  auto n = b.network("1", "a", 1, "b", 2);
  b.event(p, f, OpType::Write, 1, 2);
  b.event(f, p, OpType::Read, 3, 4);
  b.event(p, n, OpType::Sendmsg, 5, 6);
  b.event(n, p, OpType::Recvmsg, 7, 8);
  b.event(p, f, OpType::Write, 9, 10);
  auto stats = store.insert_batch(b.entities, b.events);
  CHECK(stats.accepted == 5);
  CHECK(stats.rejected == 0);
  CHECK(stats.new_entities == 3);
}

TEST_CASE("insert_batch rejects only the invalid records") {
  MemoryStore store;
  StoreBuilder b;
  auto p = b.process("1", 1, "a");
  auto f = b.file("1", "/x");
  b.event(p, f, OpType::Write, 1, 2);
  b.event(p, 999, OpType::Write, 3, 4);  // unknown endpoint
  b.event(f, p, OpType::Read, 5, 6);
  auto stats = store.insert_batch(b.entities, b.events);
  CHECK(stats.accepted == 2);
  CHECK(stats.rejected == 1);
  REQUIRE(stats.rejection_reasons.size() == 1);
  CHECK(stats.rejection_reasons[0].find("unknown dst entity") != std::string::npos);
}

TEST_CASE("re-importing an entity key merges instead of duplicating") {
  MemoryStore store;
  StoreBuilder b1, b2;
  b1.file("1", "/x");
  b2.file("1", "/x");
  store.insert_batch(b1.entities, {});
  auto stats = store.insert_batch(b2.entities, {});
  CHECK(stats.merged_entities == 1);
}

TEST_CASE("incoming honors StartBefore") {
  MemoryStore store;
  StoreBuilder b;
  auto a = b.process("1", 1, "a");
  auto v = b.file("1", "/v");
  b.event(a, v, OpType::Write, 3, 4);
  b.event(a, v, OpType::Write, 7, 8);
  b.event(a, v, OpType::Write, 11, 12);
  b.load_into(store);
  auto got = store.incoming(v, TimePredicate::start_before(8));
  REQUIRE(got.size() == 2);
  CHECK(got[0].starttime == 3);
  CHECK(got[1].starttime == 7);
}

TEST_CASE("incoming on an isolated node is empty") {
  MemoryStore store;
  StoreBuilder b;
  b.file("1", "/lonely");
  b.load_into(store);
  CHECK(store.incoming(0, TimePredicate::all()).empty());
  CHECK(store.incoming(12345, TimePredicate::all()).empty());  // unknown id
}

TEST_CASE("outgoing honors EndAfter") {
  MemoryStore store;
  StoreBuilder b;
  auto u = b.process("1", 1, "u");
  auto x = b.file("1", "/x");
  b.event(u, x, OpType::Write, 1, 2);
  b.event(u, x, OpType::Rename, 8, 9);
  b.load_into(store);
  auto got = store.outgoing(u, TimePredicate::end_after(5));
  REQUIRE(got.size() == 1);
  CHECK(got[0].endtime == 9);
  CHECK(store.outgoing(9999, TimePredicate::all()).empty());
}

TEST_CASE("adjacency fetches equal the full-scan filter on random stores") {
  for (std::uint64_t seed : {11u, 22u, 33u}) {
    std::size_t n_events = seed == 33u ? 3000 : 500;
    auto b = random_store(seed, 40, n_events);
    MemoryStore mem;
    b.load_into(mem);
    FileStore file(temp_dir(("oracle" + std::to_string(seed)).c_str()));
    b.load_into(file);

    std::mt19937_64 rng(seed * 7);
    for (int i = 0; i < 50; ++i) {
      EntityId node = rng() % 40;
      TimestampNs t1 = rng() % 1'000'000;
      TimestampNs t2 = t1 + rng() % 200'000;
      TimePredicate preds[] = {TimePredicate::all(), TimePredicate::start_before(t1),
                               TimePredicate::end_after(t1), TimePredicate::window(t1, t2)};
      for (const auto& p : preds) {
        CAPTURE(seed);
        CAPTURE(node);
        CAPTURE(static_cast<int>(p.kind));
        CHECK(same_events(mem.incoming(node, p), scan_incoming(mem, node, p)));
        CHECK(same_events(mem.outgoing(node, p), scan_outgoing(mem, node, p)));
        CHECK(same_events(file.incoming(node, p), mem.incoming(node, p)));
        CHECK(same_events(file.outgoing(node, p), mem.outgoing(node, p)));
      }
    }
  }
}

TEST_CASE("index sort orders hold for every node") {
  auto b = random_store(5, 30, 400);
  MemoryStore store;
  b.load_into(store);
  for (EntityId n = 0; n < 30; ++n) {
    auto in = store.incoming(n, TimePredicate::all());
    for (std::size_t i = 1; i < in.size(); ++i) CHECK(in[i - 1].starttime <= in[i].starttime);
    auto out = store.outgoing(n, TimePredicate::all());
    for (std::size_t i = 1; i < out.size(); ++i) CHECK(out[i - 1].endtime >= out[i].endtime);
  }
}

TEST_CASE("find_events by id yields exactly one event") {
  auto b = random_store(9, 20, 200);
  MemoryStore store;
  b.load_into(store);
  EventPattern p;
  p.id = 17;
  auto got = store.find_events(p);
  REQUIRE(got.size() == 1);
  CHECK(got[0].id == 17);
}

TEST_CASE("find_events matches optype, destination path and host") {
  MemoryStore store;
  StoreBuilder b;
  auto p1 = b.process("1", 1, "bzip2");
  auto f1 = b.file("1", "/tmp/passwords.tar.bz2");
  auto f2 = b.file("2", "/tmp/passwords.tar.bz2");
  b.event(p1, f1, OpType::Write, 1, 2);
  b.event(p1, f1, OpType::Read, 3, 4);
  b.event(p1, f2, OpType::Write, 5, 6, 0, "2");
  b.load_into(store);

  EventPattern pat;
  pat.optype = OpType::Write;
  pat.dst.kind = EntityKind::File;
  pat.dst.attrs["name"] = "/tmp/passwords.tar.bz2";  // file name aliases path
  pat.dst.attrs["hostid"] = "1";
  auto got = store.find_events(pat);
  REQUIRE(got.size() == 1);
  CHECK(got[0].id == 1);
}

TEST_CASE("find_events with no bound fields returns the whole store") {
  auto b = random_store(3, 10, 120);
  MemoryStore store;
  b.load_into(store);
  EventPattern empty;
  CHECK(store.find_events(empty).size() == store.event_count());
}

TEST_CASE("fetch_count counts yielded events and resets") {
  MemoryStore store;
  StoreBuilder b;
  auto u = b.process("1", 1, "u");
  auto v = b.file("1", "/v");
  b.event(u, v, OpType::Write, 1, 2);
  b.event(u, v, OpType::Write, 3, 4);
  b.load_into(store);
  store.reset_fetch_count();
  CHECK(store.fetch_count() == 0);
  store.incoming(v, TimePredicate::all());
  CHECK(store.fetch_count() == 2);
  store.incoming(v, TimePredicate::start_before(2));
  CHECK(store.fetch_count() == 3);  // monotone
  store.reset_fetch_count();
  CHECK(store.fetch_count() == 0);
}

TEST_CASE("file store round-trips through close and reopen") {
  auto dir = temp_dir("reopen");
  auto b = random_store(13, 25, 300);
  {
    FileStore store(dir);
    store.insert_batch(b.entities, b.events);
    CHECK(store.event_count() == 300);
  }
  FileStore reopened(dir);
  CHECK(reopened.event_count() == 300);
  CHECK(reopened.entity_count() == 25);
  MemoryStore mem;
  b.load_into(mem);
  auto a1 = mem.audit_all_events();
  auto a2 = reopened.audit_all_events();
  REQUIRE(a1.size() == a2.size());
  for (std::size_t i = 0; i < a1.size(); ++i) CHECK(a1[i] == a2[i]);
}

TEST_CASE("file store accumulates batches and rejects duplicates") {
  auto dir = temp_dir("batches");
  FileStore store(dir);
  StoreBuilder b;
  auto u = b.process("1", 1, "u");
  auto v = b.file("1", "/v");
  b.event(u, v, OpType::Write, 1, 2);
  auto s1 = store.insert_batch(b.entities, b.events);
  CHECK(s1.accepted == 1);
  auto s2 = store.insert_batch({}, b.events);  // same event id again
  CHECK(s2.accepted == 0);
  CHECK(s2.rejected == 1);
  CHECK(s2.rejection_reasons[0].find("duplicate") != std::string::npos);
  CHECK(store.event_count() == 1);
}

TEST_CASE("file store on-disk layout matches the record format") {
  auto dir = temp_dir("layout");
  {
    FileStore store(dir);
    StoreBuilder b;
    auto u = b.process("9", 7, "u");
    auto v = b.file("9", "/v");
    b.event(u, v, OpType::Rename, 0x1122334455667788, 0x1122334455667799, 0xAABB, "9");
    store.insert_batch(b.entities, b.events);
  }
  std::ifstream in(dir + "/events_by_dst.pvqs", std::ios::binary);
  REQUIRE(in.good());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  REQUIRE(bytes.size() >= 14 + 53);
  CHECK(bytes.substr(0, 4) == "PVQS");
  CHECK(static_cast<unsigned char>(bytes[4]) == 1);  // version u16 LE
  CHECK(static_cast<unsigned char>(bytes[5]) == 0);
  CHECK(static_cast<unsigned char>(bytes[6]) == 1);  // count u64 LE
  const char* rec = bytes.data() + 14;
  auto u64_at = [&](int off) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i)
      v = (v << 8) | static_cast<unsigned char>(rec[off + i]);
    return v;
  };
  CHECK(u64_at(0) == 1);                              // id
  CHECK(u64_at(8) == 0);                              // src
  CHECK(u64_at(16) == 1);                             // dst
  CHECK(static_cast<unsigned char>(rec[24]) == 2);    // optype rename
  CHECK(u64_at(25) == 0x1122334455667788ull);         // start
  CHECK(u64_at(33) == 0x1122334455667799ull);         // end
  CHECK(u64_at(41) == 0xAABBull);                     // amount
}

TEST_CASE("memory and file stores agree on find_events") {
  auto b = random_store(21, 30, 250);
  MemoryStore mem;
  b.load_into(mem);
  FileStore file(temp_dir("find"));
  b.load_into(file);
  EventPattern pat;
  pat.optype = OpType::Write;
  auto m = mem.find_events(pat);
  auto f = file.find_events(pat);
  REQUIRE(m.size() == f.size());
  for (std::size_t i = 0; i < m.size(); ++i) CHECK(m[i] == f[i]);
}
