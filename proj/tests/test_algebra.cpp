#include <doctest.h>

#include "helpers.hpp"
#include "provql/algebra.hpp"

using namespace provql;
using namespace provql::testing;

namespace {

// Two stores holding the same entities interned in different orders, so
// surrogate ids differ while keys agree.
struct TwinStores {
  MemoryStore left, right;
  std::vector<EntityKey> keys;

  TwinStores() {
    StoreBuilder fwd;
    fwd.process("1", 1, "a");
    fwd.file("1", "/x");
    fwd.network("2", "ip1", 1, "ip2", 2);
    fwd.file("2", "/y");
    keys.reserve(fwd.entities.size());
    for (const auto& e : fwd.entities) keys.push_back(e.key);
    left.insert_batch(fwd.entities, {});
    auto reversed = fwd.entities;
    std::reverse(reversed.begin(), reversed.end());
    right.insert_batch(reversed, {});
  }

  GraphEdge edge(const EventStore& s, std::size_t src_key, std::size_t dst_key, OpType op,
                 TimestampNs t0, TimestampNs t1, std::uint64_t amount, EventId id) const {
    GraphEdge e;
    e.src = *s.entity_id_by_key(keys[src_key]);
    e.dst = *s.entity_id_by_key(keys[dst_key]);
    e.optype = op;
    e.starttime = t0;
    e.endtime = t1;
    e.amount = amount;
    e.raw_ids = {id};
    return e;
  }
};

std::set<std::string> signature_set(const ProvGraph& g, const EventStore& s) {
  std::set<std::string> sigs;
  for (const auto& e : g.edges) sigs.insert(edge_signature(e, s).canonical());
  return sigs;
}

// Random graph over a shared random store; edges reference real entities.
ProvGraph random_graph(const StoreBuilder& b, std::uint64_t seed, std::size_t n_edges) {
  std::mt19937_64 rng(seed);
  ProvGraph g;
  for (std::size_t i = 0; i < n_edges; ++i) {
    GraphEdge e;
    e.src = rng() % b.entities.size();
    e.dst = rng() % b.entities.size();
    if (e.src == e.dst) e.dst = (e.dst + 1) % b.entities.size();
    e.optype = static_cast<OpType>(rng() % kOpTypeCount);
    e.starttime = static_cast<TimestampNs>(rng() % 10'000);
    e.endtime = e.starttime + 1 + static_cast<TimestampNs>(rng() % 500);
    e.amount = rng() % 1000;
    e.raw_ids = {seed * 100000 + i};
    if (rng() % 2) e.weight = (rng() % 1000) / 1000.0;
    g.add_edge(std::move(e));
  }
  return g;
}

}  // namespace

TEST_CASE("union with the empty graph is the identity") {
  auto b = random_store(71, 10, 0);
  MemoryStore store;
  b.load_into(store);
  auto g = random_graph(b, 1, 20);
  ProvGraph empty;
  auto u = graph_union(g, store, empty, store);
  CHECK(signature_set(u, store) == signature_set(g, store));
  CHECK(u.edges.size() == g.edges.size());
}

TEST_CASE("union with itself changes nothing") {
  auto b = random_store(72, 10, 0);
  MemoryStore store;
  b.load_into(store);
  auto g = random_graph(b, 2, 25);
  auto u = graph_union(g, store, g, store);
  CHECK(u.edges.size() == g.edges.size());
  CHECK(signature_set(u, store) == signature_set(g, store));
  // Fused fields unchanged as well: amounts must not double.
  std::uint64_t before = 0, after = 0;
  for (const auto& e : g.edges) before += e.amount;
  for (const auto& e : u.edges) after += e.amount;
  CHECK(before == after);
}

TEST_CASE("union and intersect laws hold on random graph pairs") {
  auto b = random_store(73, 12, 0);
  MemoryStore store;
  b.load_into(store);
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    auto g1 = random_graph(b, seed * 2, 5 + seed % 20);
    auto g2 = random_graph(b, seed * 2 + 1, 5 + (seed * 3) % 20);
    auto s1 = signature_set(g1, store);
    auto s2 = signature_set(g2, store);

    auto u12 = signature_set(graph_union(g1, store, g2, store), store);
    auto u21 = signature_set(graph_union(g2, store, g1, store), store);
    std::set<std::string> expected_union = s1;
    expected_union.insert(s2.begin(), s2.end());
    CHECK(u12 == expected_union);   // never invents or loses signatures
    CHECK(u12 == u21);              // commutative

    auto i12 = signature_set(graph_intersect(g1, store, g2, store), store);
    for (const auto& sig : i12) {
      CHECK(s1.count(sig));
      CHECK(s2.count(sig));        // contained in both
    }
    std::set<std::string> expected_inter;
    for (const auto& sig : s1)
      if (s2.count(sig)) expected_inter.insert(sig);
    CHECK(i12 == expected_inter);
  }
}

TEST_CASE("intersect with itself is the identity, with disjoint graphs empty") {
  auto b = random_store(74, 10, 0);
  MemoryStore store;
  b.load_into(store);
  auto g = random_graph(b, 5, 15);
  auto self = graph_intersect(g, store, g, store);
  CHECK(self.edges.size() == g.edges.size());

  ProvGraph left, right;
  auto e1 = g.edges[0];
  left.add_edge(e1);
  auto e2 = g.edges[1];
  e2.optype = e1.optype == OpType::Read ? OpType::Write : OpType::Read;
  right.add_edge(e2);
  if (!(edge_signature(e1, store) == edge_signature(e2, store))) {
    auto inter = graph_intersect(left, store, right, store);
    CHECK(inter.edges.empty());
    CHECK(inter.nodes.empty());
  }
}

TEST_CASE("signatures align graphs from stores with different id orders") {
  TwinStores twins;
  ProvGraph gl, gr;
  gl.add_edge(twins.edge(twins.left, 0, 1, OpType::Write, 0, 10, 100, 1));
  gl.add_edge(twins.edge(twins.left, 2, 3, OpType::Sendmsg, 5, 15, 50, 2));
  // The same two logical edges expressed in the other store's id space.
  gr.add_edge(twins.edge(twins.right, 0, 1, OpType::Write, 0, 10, 100, 1));
  gr.add_edge(twins.edge(twins.right, 2, 3, OpType::Sendmsg, 5, 15, 50, 2));

  auto inter = graph_intersect(gl, twins.left, gr, twins.right);
  CHECK(inter.edges.size() == 2);
  auto uni = graph_union(gl, twins.left, gr, twins.right);
  CHECK(uni.edges.size() == 2);  // identical raw ids dedupe
}

TEST_CASE("cross-side collisions fuse hulls amounts and weights") {
  auto b = random_store(75, 6, 0);
  MemoryStore store;
  b.load_into(store);
  ProvGraph g1, g2;
  GraphEdge a;
  a.src = 0;
  a.dst = 1;
  a.optype = OpType::Write;
  a.starttime = 0;
  a.endtime = 10;
  a.amount = 100;
  a.raw_ids = {1};
  a.weight = 0.3;
  GraphEdge c = a;
  c.starttime = 50;
  c.endtime = 60;
  c.amount = 7;
  c.raw_ids = {2};
  c.weight = 0.9;
  g1.add_edge(a);
  g2.add_edge(c);
  auto u = graph_union(g1, store, g2, store);
  REQUIRE(u.edges.size() == 1);
  CHECK(u.edges[0].starttime == 0);
  CHECK(u.edges[0].endtime == 60);
  CHECK(u.edges[0].amount == 107);
  CHECK(u.edges[0].raw_count == 2);
  CHECK(*u.edges[0].weight == doctest::Approx(0.9));
}

TEST_CASE("union merges scores by max and intersect keeps the left metadata") {
  auto b = random_store(76, 6, 0);
  MemoryStore store;
  b.load_into(store);
  ProvGraph g1, g2;
  GraphEdge e;
  e.src = 0;
  e.dst = 1;
  e.optype = OpType::Write;
  e.starttime = 0;
  e.endtime = 1;
  e.raw_ids = {1};
  e.weight = 0.2;
  g1.add_edge(e);
  g1.scores[0] = 0.4;
  GraphEdge e2 = e;
  e2.weight = 0.8;
  g2.add_edge(e2);
  g2.scores[0] = 0.9;
  auto u = graph_union(g1, store, g2, store);
  CHECK(u.scores.at(0) == doctest::Approx(0.9));

  auto i = graph_intersect(g1, store, g2, store);
  REQUIRE(i.edges.size() == 1);
  CHECK(*i.edges[0].weight == doctest::Approx(0.8));  // max of the two sides
  CHECK(i.scores.at(0) == doctest::Approx(0.4));      // scores come from the left
}

TEST_CASE("an empty graph exports as a valid empty DOT digraph") {
  MemoryStore store;
  ProvGraph g;
  auto dot = export_dot(g, store);
  CHECK(dot.find("digraph") != std::string::npos);
  CHECK(dot.find("}") != std::string::npos);
}

TEST_CASE("a one-edge graph exports two nodes and one edge statement") {
  StoreBuilder b;
  auto p = b.process("1", 42, "bash");
  auto f = b.file("1", "/tmp/x");
  MemoryStore store;
  store.insert_batch(b.entities, {});
  ProvGraph g;
  GraphEdge e;
  e.src = p;
  e.dst = f;
  e.optype = OpType::Write;
  e.starttime = 100;
  e.endtime = 110;
  e.weight = 0.5;
  e.raw_ids = {1};
  g.add_edge(e);
  auto dot = export_dot(g, store);
  CHECK(dot.find("process:42:bash") != std::string::npos);
  CHECK(dot.find("file:/tmp/x") != std::string::npos);
  CHECK(dot.find("write [100,110] w=0.5") != std::string::npos);
  CHECK(dot.find("->") != std::string::npos);

  auto csv = export_csv(g, store);
  CHECK(csv.find("src_host,src_kind,src_name") == 0);
  CHECK(csv.find("write,100,110") != std::string::npos);
}

TEST_CASE("JSON export round-trips to an equal graph") {
  auto b = random_store(77, 15, 0);
  MemoryStore store;
  b.load_into(store);
  auto g = random_graph(b, 11, 30);
  g.scores[3] = 0.25;
  g.scores[5] = 1.0;
  // Scores only survive for nodes present in the graph.
  for (auto it = g.scores.begin(); it != g.scores.end();) {
    if (!g.nodes.count(it->first))
      it = g.scores.erase(it);
    else
      ++it;
  }
  auto text = export_json(g, store);
  auto back = import_graph_json(text, store);
  CHECK(back.nodes == g.nodes);
  CHECK(back.scores.size() == g.scores.size());
  for (const auto& [n, v] : g.scores) CHECK(back.scores.at(n) == doctest::Approx(v));
  REQUIRE(back.edges.size() == g.edges.size());
  CHECK(export_json(back, store) == text);  // canonical ordering is stable
}
