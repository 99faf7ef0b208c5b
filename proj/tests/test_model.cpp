#include <doctest.h>

#include "helpers.hpp"
#include "provql/model.hpp"
#include "provql/store.hpp"

using namespace provql;
using namespace provql::testing;

TEST_CASE("validate_event accepts a well-formed read") {
  Event e;
  e.id = 1;
  e.src = 0;
  e.dst = 1;
  e.starttime = 5;
  e.endtime = 9;
  CHECK(validate_event(e, {0, 1}).empty());
}

TEST_CASE("validate_event flags an inverted interval") {
  Event e;
  e.id = 1;
  e.src = 0;
  e.dst = 1;
  e.starttime = 9;
  e.endtime = 5;
  auto v = validate_event(e, {0, 1});
  REQUIRE(v.size() == 1);
  CHECK(v[0] == "time order");
}

TEST_CASE("validate_event flags a self loop") {
  Event e;
  e.id = 1;
  e.src = 3;
  e.dst = 3;
  e.starttime = 1;
  e.endtime = 2;
  auto v = validate_event(e, {3});
  REQUIRE(v.size() == 1);
  CHECK(v[0] == "self loop");
}

TEST_CASE("validate_event reports every violation") {
  Event e;
  e.id = 1;
  e.src = 7;
  e.dst = 7;
  e.starttime = 9;
  e.endtime = 5;
  auto v = validate_event(e, {});
  CHECK(v.size() == 4);  // time order, self loop, both endpoints unknown
}

TEST_CASE("entity keys compare by discriminator") {
  auto a = EntityKey::file("1", "/tmp/x");
  auto b = EntityKey::file("1", "/tmp/x");
  auto c = EntityKey::file("2", "/tmp/x");
  auto d = EntityKey::process("1", 42, "bash");
  CHECK(a == b);
  CHECK(!(a == c));
  CHECK(!(a == d));
  CHECK(EntityKeyHash{}(a) == EntityKeyHash{}(b));
}

TEST_CASE("entity key validation requires the kind discriminator") {
  EntityKey k;
  k.kind = EntityKind::File;
  k.host_id = "1";
  CHECK(!k.validate().empty());
  k.path = "/x";
  CHECK(k.validate().empty());
  EntityKey n;
  n.kind = EntityKind::Network;
  n.host_id = "1";
  CHECK(!n.validate().empty());
}

TEST_CASE("entity interning is idempotent on the key") {
  MemoryStore store;
  StoreBuilder b;
  b.file("1", "/tmp/x");
  auto s1 = store.insert_batch(b.entities, {});
  CHECK(s1.new_entities == 1);
  auto s2 = store.insert_batch(b.entities, {});
  CHECK(s2.new_entities == 0);
  CHECK(s2.merged_entities == 1);
  CHECK(store.entity_count() == 1);
}

TEST_CASE("graph adjacency indexes endpoints") {
  ProvGraph g;
  GraphEdge e;
  e.src = 1;
  e.dst = 2;
  e.raw_ids = {10};
  g.add_edge(e);
  e.src = 2;
  e.dst = 3;
  e.raw_ids = {11};
  g.add_edge(e);
  GraphAdjacency adj(g);
  CHECK(adj.out(1).size() == 1);
  CHECK(adj.out(2).size() == 1);
  CHECK(adj.in(2).size() == 1);
  CHECK(adj.in(1).empty());
  CHECK(g.nodes.size() == 3);
  CHECK(g.raw_id_set() == std::unordered_set<EventId>{10, 11});
}

TEST_CASE("optype round-trips through its string form") {
  for (int i = 0; i < kOpTypeCount; ++i) {
    auto op = static_cast<OpType>(i);
    auto back = optype_from_string(to_string(op));
    REQUIRE(back.has_value());
    CHECK(*back == op);
  }
  CHECK(!optype_from_string("frobnicate").has_value());
}
