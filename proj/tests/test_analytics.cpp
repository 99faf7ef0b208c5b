#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "provql/analytics.hpp"
#include "provql/parser.hpp"

using namespace provql;
using namespace provql::ast;
using namespace provql::testing;

namespace {

GraphEdge raw_edge(EntityId src, EntityId dst, OpType op, TimestampNs s, TimestampNs e,
                   std::uint64_t amount, EventId id) {
  GraphEdge g;
  g.src = src;
  g.dst = dst;
  g.optype = op;
  g.starttime = s;
  g.endtime = e;
  g.amount = amount;
  g.raw_ids = {id};
  return g;
}

constexpr TimestampNs kSec = 1'000'000'000;

// Direct formula transcription used as the independent re-evaluation
// oracle for the three canonical features.
double oracle_amount_feature(std::uint64_t r_amount, std::uint64_t st_amount) {
  double d = std::fabs(static_cast<double>(r_amount) - static_cast<double>(st_amount)) + 0.0001;
  return 1.0 / d;
}
double oracle_time_feature(TimestampNs r_end, TimestampNs st_end) {
  double dt = std::fabs(static_cast<double>(r_end) - static_cast<double>(st_end));
  if (dt < 1e-4) dt = 1e-4;  // the evaluator's division guard
  return std::log(1.0 + 1.0 / dt);
}
double oracle_degree_feature(std::size_t out_deg, std::size_t in_deg) {
  double denom = in_deg == 0 ? 1.0 : static_cast<double>(in_deg);
  return static_cast<double>(out_deg) / denom;
}

std::vector<ExprPtr> canonical_features() {
  std::string q = "MATCH (p:Process)-[st:FileEvent{id:1}]->(f:File{name:\"/x\"})\n"
                  "BFS (r IN backward(f) | MATCH v=dst(r) WHERE r.starttime<max(collect(vout IN "
                  "out(v) | vout.endtime))) YIELD g1\nUNWIND g1 AS e\nSET e.weight=projection("
                  "1/(abs(r.amount-st.amount)+0.0001),"
                  "ln(1+1/abs(r.endtime-st.endtime)),"
                  "count(out(v))/count(in(v)))\nRETURN g1";
  auto r = parse_query(q);
  auto* ast_q = std::get_if<QueryAst>(&r);
  REQUIRE(ast_q != nullptr);
  return std::get<SetWeightStage>(ast_q->sub_queries[0].pipelines[0].stages[2]).features;
}

ReduceEval weighted_sum_reduce() {
  ReduceEval spec;
  spec.acc_name = "sum";
  spec.init = 0.0;
  spec.iter_var = "o";
  spec.node_var = "u";
  // sum + o.weight * dst(o).rel
  auto sum = make_expr(Expr::Var{"sum"});
  auto w = make_expr(Expr::Prop{make_expr(Expr::Var{"o"}), "weight"});
  auto rel = make_expr(
      Expr::Prop{make_expr(Expr::Call{FuncKind::Dst, make_expr(Expr::Var{"o"})}), "rel"});
  spec.body = make_expr(Expr::Binary{BinOp::Add, sum, make_expr(Expr::Binary{BinOp::Mul, w, rel})});
  return spec;
}

}  // namespace

TEST_CASE("a burst of writes merges into one edge") {
  ProvGraph g;
  std::uint64_t total = 0;
  for (int i = 0; i < 5; ++i) {
    g.add_edge(raw_edge(1, 2, OpType::Write, i * kSec, i * kSec + kSec / 2, 100 + i, 10 + i));
    total += 100 + i;
  }
  auto merged = merge_parallel_edges(g, 10 * kSec);
  REQUIRE(merged.edges.size() == 1);
  CHECK(merged.edges[0].raw_count == 5);
  CHECK(merged.edges[0].amount == total);
  CHECK(merged.edges[0].starttime == 0);
  CHECK(merged.edges[0].endtime == 4 * kSec + kSec / 2);
  CHECK(merged.edges[0].raw_ids.size() == 5);
}

TEST_CASE("events past the gap threshold stay separate") {
  ProvGraph g;
  g.add_edge(raw_edge(1, 2, OpType::Write, 0, kSec, 10, 1));
  g.add_edge(raw_edge(1, 2, OpType::Write, 61 * kSec, 62 * kSec, 20, 2));
  auto merged = merge_parallel_edges(g, 10 * kSec);
  CHECK(merged.edges.size() == 2);
}

TEST_CASE("different signatures never merge") {
  ProvGraph g;
  g.add_edge(raw_edge(1, 2, OpType::Write, 0, 1, 10, 1));
  g.add_edge(raw_edge(1, 2, OpType::Read, 0, 1, 10, 2));
  g.add_edge(raw_edge(1, 3, OpType::Write, 0, 1, 10, 3));
  auto merged = merge_parallel_edges(g, 10 * kSec);
  CHECK(merged.edges.size() == 3);
}

TEST_CASE("threshold zero merges exactly interval-adjacent events") {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 30; ++trial) {
    ProvGraph g;
    int n = 2 + static_cast<int>(rng() % 40);
    for (int i = 0; i < n; ++i) {
      TimestampNs s = static_cast<TimestampNs>(rng() % 1000);
      g.add_edge(raw_edge(1 + (rng() % 2), 10, OpType::Write, s, s + 1 + (rng() % 50), 1, i + 1));
    }
    for (TimestampNs gap : {TimestampNs{0}, TimestampNs{7}, TimestampNs{100}}) {
      auto merged = merge_parallel_edges(g, gap);
      CHECK(merged.edges.size() == merge_count_oracle(g, gap));
    }
  }
}

TEST_CASE("merging conserves amount and raw counts") {
  auto b = random_store(17, 10, 300, 10'000);
  ProvGraph g;
  for (const auto& e : b.events) g.add_edge(GraphEdge::from_event(e));
  std::uint64_t amount_before = 0, count_before = 0;
  for (const auto& e : g.edges) {
    amount_before += e.amount;
    count_before += e.raw_count;
  }
  auto merged = merge_parallel_edges(g, 500);
  std::uint64_t amount_after = 0, count_after = 0;
  for (const auto& e : merged.edges) {
    amount_after += e.amount;
    count_after += e.raw_count;
  }
  CHECK(amount_after == amount_before);
  CHECK(count_after == count_before);
  CHECK(merged.edges.size() <= g.edges.size());
}

TEST_CASE("features match the independent re-evaluation to 1e-9 relative") {
  // A 10-edge toy graph with varied amounts/times/degrees.
  ProvGraph g;
  std::mt19937_64 rng(7);
  for (int i = 0; i < 10; ++i) {
    EntityId src = 1 + (i % 4);
    EntityId dst = 10 + (i % 3);
    g.add_edge(raw_edge(src, dst, OpType::Write, 1000 + i * 17, 2000 + i * 31,
                        50 + (rng() % 1000), 100 + i));
  }
  GraphEdge poi = raw_edge(99, 100, OpType::Write, 5000, 6000, 337, 999);
  GraphAdjacency adj(g);
  GraphView view(g, adj);
  FeatureContext ctx;
  ctx.poi_edge = &poi;
  ctx.poi_var = "st";
  ctx.edge_vars = {"e", "r"};
  ctx.step_node_var = "v";
  ctx.step_bind = FuncKind::Dst;
  ctx.adjacency = &view;
  auto features = canonical_features();
  auto m = compute_features(g, ctx, features, ExecMode::Serial);
  REQUIRE(m.rows == 10);
  REQUIRE(m.cols == 3);
  for (std::size_t i = 0; i < 10; ++i) {
    const auto& e = g.edges[i];
    double f1 = oracle_amount_feature(e.amount, poi.amount);
    double f2 = oracle_time_feature(e.endtime, poi.endtime);
    double f3 = oracle_degree_feature(adj.out(e.dst).size(), adj.in(e.dst).size());
    CHECK(m.at(i, 0) == doctest::Approx(f1).epsilon(1e-9));
    CHECK(m.at(i, 1) == doctest::Approx(f2).epsilon(1e-9));
    CHECK(m.at(i, 2) == doctest::Approx(f3).epsilon(1e-9));
  }
}

TEST_CASE("feature evaluation is identical in serial and parallel mode") {
  auto b = random_store(23, 20, 400, 1'000'000);
  ProvGraph g;
  for (const auto& e : b.events) g.add_edge(GraphEdge::from_event(e));
  GraphEdge poi = raw_edge(99, 100, OpType::Write, 5000, 6000, 337, 999);
  GraphAdjacency adj(g);
  GraphView view(g, adj);
  FeatureContext ctx;
  ctx.poi_edge = &poi;
  ctx.edge_vars = {"e", "r"};
  ctx.step_node_var = "v";
  ctx.step_bind = FuncKind::Dst;
  ctx.adjacency = &view;
  auto features = canonical_features();
  auto serial = compute_features(g, ctx, features, ExecMode::Serial);
  auto parallel = compute_features(g, ctx, features, ExecMode::Parallel);
  REQUIRE(serial.data.size() == parallel.data.size());
  for (std::size_t i = 0; i < serial.data.size(); ++i) CHECK(serial.data[i] == parallel.data[i]);
}

TEST_CASE("k-means separates two blobs") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> noise(0.0, 0.3);
  for (int trial = 0; trial < 10; ++trial) {
    FeatureMatrix m;
    m.cols = 3;
    std::vector<int> truth;
    for (int i = 0; i < 40; ++i) {
      bool hot = i % 4 == 0;
      truth.push_back(hot ? 1 : 0);
      double base = hot ? 10.0 : 0.0;
      m.data.push_back(base + noise(rng));
      m.data.push_back(base * 2 + noise(rng));
      m.data.push_back(base - 1 + noise(rng));
      m.rows++;
    }
    auto r = cluster_two(m, trial);
    REQUIRE(!r.degenerate);
    // Labels match blob membership up to label swap.
    int agree = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) agree += (r.labels[i] == truth[i]);
    CHECK((agree == 0 || agree == static_cast<int>(truth.size())));
  }
}

TEST_CASE("identical rows are a degenerate clustering") {
  FeatureMatrix m;
  m.rows = 5;
  m.cols = 2;
  m.data.assign(10, 3.5);
  auto r = cluster_two(m, 0);
  CHECK(r.degenerate);
}

TEST_CASE("two distinct rows land in their own clusters") {
  FeatureMatrix m;
  m.rows = 2;
  m.cols = 1;
  m.data = {0.0, 10.0};
  auto r = cluster_two(m, 0);
  REQUIRE(!r.degenerate);
  CHECK(r.labels[0] != r.labels[1]);
}

TEST_CASE("1-D Fisher projection separates and orients the classes") {
  // Classes {0, 0.1} and {10, 10.1}: the closed-form Fisher direction in
  // one dimension is a positive multiple of (mu1 - mu0); after min-max
  // scaling the high class must sit strictly above the low class.
  FeatureMatrix m;
  m.rows = 4;
  m.cols = 1;
  m.data = {0.0, 0.1, 10.0, 10.1};
  std::vector<int> labels = {0, 0, 1, 1};
  auto out = lda_project(m, labels);
  CHECK(out.model.critical_cluster == 1);
  double lo_max = std::max(out.weights[0], out.weights[1]);
  double hi_min = std::min(out.weights[2], out.weights[3]);
  CHECK(hi_min > lo_max);  // strict margin
  CHECK(out.weights[2] <= 1.0);
  for (double w : out.weights) {
    CHECK(w >= 0.0);
    CHECK(w <= 1.0);
  }
}

TEST_CASE("identical class means fall back to the equal-coefficient projection") {
  FeatureMatrix m;
  m.rows = 4;
  m.cols = 2;
  // mu0 == mu1 but nonzero spread.
  m.data = {0, 0, 2, 2, 0, 2, 2, 0};
  std::vector<int> labels = {0, 0, 1, 1};
  auto out = lda_project(m, labels);
  CHECK(out.model.fallback);
}

TEST_CASE("single-feature projection preserves the feature order") {
  FeatureMatrix m;
  m.rows = 6;
  m.cols = 1;
  m.data = {5, 1, 9, 3, 7, 2};
  std::vector<int> labels = {1, 0, 1, 0, 1, 0};
  auto out = lda_project(m, labels);
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t j = 0; j < m.rows; ++j)
      if (m.data[i] < m.data[j]) CHECK(out.weights[i] <= out.weights[j]);
}

TEST_CASE("cluster partition is invariant to positive per-feature scaling") {
  std::mt19937_64 rng(13);
  std::normal_distribution<double> noise(0.0, 0.2);
  FeatureMatrix m;
  m.cols = 3;
  for (int i = 0; i < 30; ++i) {
    bool hot = i % 3 == 0;
    double base = hot ? 6.0 : 0.0;
    for (std::size_t c = 0; c < 3; ++c) m.data.push_back(base + noise(rng));
    m.rows++;
  }
  auto r1 = cluster_two(m, 0);
  FeatureMatrix scaled = m;
  for (std::size_t i = 0; i < scaled.rows; ++i) scaled.at(i, 1) *= 1000.0;
  auto r2 = cluster_two(scaled, 0);
  REQUIRE(!r1.degenerate);
  REQUIRE(!r2.degenerate);
  // Same partition up to label swap (standardization absorbs the scale).
  bool same = true, flipped = true;
  for (std::size_t i = 0; i < m.rows; ++i) {
    same = same && r1.labels[i] == r2.labels[i];
    flipped = flipped && r1.labels[i] != r2.labels[i];
  }
  CHECK((same || flipped));

  // The critical-cluster orientation is also unchanged.
  auto o1 = lda_project(m, r1.labels);
  auto o2 = lda_project(scaled, r2.labels);
  std::vector<int> crit1(m.rows), crit2(m.rows);
  for (std::size_t i = 0; i < m.rows; ++i) {
    crit1[i] = r1.labels[i] == o1.model.critical_cluster;
    crit2[i] = r2.labels[i] == o2.model.critical_cluster;
  }
  CHECK(crit1 == crit2);
}

TEST_CASE("normalize_outgoing splits weight by the out-edge sum") {
  ProvGraph g;
  auto e1 = raw_edge(1, 2, OpType::Write, 0, 1, 0, 1);
  e1.weight = 1.0;
  auto e2 = raw_edge(1, 3, OpType::Write, 0, 1, 0, 2);
  e2.weight = 3.0;
  g.add_edge(e1);
  g.add_edge(e2);
  normalize_outgoing(g, ExecMode::Serial);
  CHECK(*g.edges[0].weight == doctest::Approx(0.25));
  CHECK(*g.edges[1].weight == doctest::Approx(0.75));
}

TEST_CASE("a single out-edge normalizes to exactly one") {
  ProvGraph g;
  auto e = raw_edge(1, 2, OpType::Write, 0, 1, 0, 1);
  e.weight = 0.37;
  g.add_edge(e);
  normalize_outgoing(g);
  CHECK(*g.edges[0].weight == doctest::Approx(1.0));
}

TEST_CASE("normalized out-weights sum to one on random graphs") {
  for (std::uint64_t seed : {1u, 2u, 3u, 4u, 5u}) {
    EntityId poi;
    auto g = random_dag(seed, 30, 0.2, &poi);
    normalize_outgoing(g, seed % 2 ? ExecMode::Serial : ExecMode::Parallel);
    GraphAdjacency adj(g);
    for (EntityId n : g.nodes) {
      auto out = adj.out(n);
      if (out.empty()) continue;
      double sum = 0;
      for (auto i : out) sum += *g.edges[i].weight;
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("zero-sum out-groups get uniform weights") {
  ProvGraph g;
  for (int i = 0; i < 4; ++i) {
    auto e = raw_edge(1, 2 + i, OpType::Write, 0, 1, 0, i + 1);
    e.weight = 0.0;
    g.add_edge(e);
  }
  normalize_outgoing(g);
  for (const auto& e : g.edges) CHECK(*e.weight == doctest::Approx(0.25));
}

TEST_CASE("propagation through a weight-one chain is all ones") {
  ProvGraph g;
  auto e1 = raw_edge(1, 2, OpType::Write, 0, 1, 0, 1);
  e1.weight = 1.0;
  auto e2 = raw_edge(2, 3, OpType::Write, 2, 3, 0, 2);
  e2.weight = 1.0;
  g.add_edge(e1);
  g.add_edge(e2);
  auto r = propagate(g, weighted_sum_reduce(), /*poi=*/3);
  CHECK(r.converged);
  CHECK(r.scores.at(1) == doctest::Approx(1.0));
  CHECK(r.scores.at(2) == doctest::Approx(1.0));
  CHECK(r.scores.at(3) == doctest::Approx(1.0));
}

TEST_CASE("propagation is convex on normalized weights") {
  ProvGraph g;
  auto e1 = raw_edge(1, 2, OpType::Write, 0, 1, 0, 1);
  e1.weight = 0.25;
  auto e2 = raw_edge(1, 3, OpType::Write, 0, 1, 0, 2);
  e2.weight = 0.75;
  auto e3 = raw_edge(2, 4, OpType::Write, 2, 3, 0, 3);
  e3.weight = 1.0;
  auto e4 = raw_edge(3, 4, OpType::Write, 2, 3, 0, 4);
  e4.weight = 1.0;
  g.add_edge(e1);
  g.add_edge(e2);
  g.add_edge(e3);
  g.add_edge(e4);
  auto r = propagate(g, weighted_sum_reduce(), /*poi=*/4);
  CHECK(r.scores.at(2) == doctest::Approx(1.0));
  CHECK(r.scores.at(3) == doctest::Approx(1.0));
  CHECK(r.scores.at(1) == doctest::Approx(1.0));  // 0.25*1 + 0.75*1
}

TEST_CASE("propagation matches the topological oracle on random DAGs") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    EntityId poi;
    auto g = random_dag(seed, 5 + seed * 2, 0.15, &poi);
    normalize_outgoing(g);
    auto oracle = topo_propagate_oracle(g, poi);
    auto iterative = propagate(g, weighted_sum_reduce(), poi, 1e-13, 1000,
                               seed % 2 ? ExecMode::Parallel : ExecMode::Serial);
    CHECK(iterative.converged);
    for (const auto& [node, expect] : oracle) {
      CAPTURE(seed);
      CAPTURE(node);
      CHECK(iterative.scores.at(node) == doctest::Approx(expect).epsilon(1e-10));
      CHECK(iterative.scores.at(node) >= 0.0);
      CHECK(iterative.scores.at(node) <= 1.0 + 1e-12);
    }
  }
}

TEST_CASE("propagation converges within the DAG's longest path length") {
  EntityId poi;
  auto g = random_dag(9, 30, 0.15, &poi);
  normalize_outgoing(g);
  auto r = propagate(g, weighted_sum_reduce(), poi);
  CHECK(r.converged);
  CHECK(r.iterations <= 31);  // longest path < node count, plus the final check
}

TEST_CASE("serial and parallel propagation produce identical scores") {
  EntityId poi;
  auto g = random_dag(33, 40, 0.2, &poi);
  normalize_outgoing(g);
  auto a = propagate(g, weighted_sum_reduce(), poi, 1e-13, 1000, ExecMode::Serial);
  auto b = propagate(g, weighted_sum_reduce(), poi, 1e-13, 1000, ExecMode::Parallel);
  REQUIRE(a.scores.size() == b.scores.size());
  for (const auto& [n, v] : a.scores) CHECK(b.scores.at(n) == v);
  CHECK(a.iterations == b.iterations);
}

TEST_CASE("weight filter keeps the boundary and drops below it") {
  ProvGraph g;
  double weights[] = {0.4, 0.5, 0.9};
  for (int i = 0; i < 3; ++i) {
    auto e = raw_edge(1 + i, 10 + i, OpType::Write, 0, 1, 0, i + 1);
    e.weight = weights[i];
    g.add_edge(e);
  }
  auto pred_text = [] {
    std::string q = "MATCH (p:Process)-[st:FileEvent{id:1}]->(f:File{name:\"/x\"})\n"
                    "BFS (r IN backward(f) | MATCH v=dst(r) WHERE r.starttime<max(collect(vout IN "
                    "out(v) | vout.endtime))) YIELD g1\nUNWIND g1 AS e\n"
                    "SET e.weight=projection(e.amount)\nWITH e WHERE e.weight >=0.5\nRETURN g1";
    auto r = parse_query(q);
    auto* ast_q = std::get_if<QueryAst>(&r);
    REQUIRE(ast_q != nullptr);
    for (const auto& s : ast_q->sub_queries[0].pipelines[0].stages)
      if (auto* f = std::get_if<WeightFilterStage>(&s)) return f->predicate;
    return ExprPtr{};
  }();
  REQUIRE(pred_text != nullptr);
  auto filtered = filter_by_weight(g, *pred_text, "e", std::nullopt);
  CHECK(filtered.edges.size() == 2);  // 0.5 and 0.9; ">=" keeps the boundary

  // Threshold >= 0 is the identity on edges.
  auto zero = make_expr(Expr::Binary{
      BinOp::Ge, make_expr(Expr::Prop{make_expr(Expr::Var{"e"}), "weight"}),
      make_expr(Expr::IntLit{0})});
  CHECK(filter_by_weight(g, *zero, "e", std::nullopt).edges.size() == 3);
}

TEST_CASE("weight filter drops stranded nodes but keeps the POI") {
  ProvGraph g;
  auto e1 = raw_edge(1, 2, OpType::Write, 0, 1, 0, 1);
  e1.weight = 0.9;
  auto e2 = raw_edge(3, 4, OpType::Write, 0, 1, 0, 2);
  e2.weight = 0.1;
  g.add_edge(e1);
  g.add_edge(e2);
  auto pred = make_expr(Expr::Binary{
      BinOp::Ge, make_expr(Expr::Prop{make_expr(Expr::Var{"e"}), "weight"}),
      make_expr(Expr::FloatLit{0.5})});
  auto filtered = filter_by_weight(g, *pred, "e", EntityId{4});
  CHECK(filtered.edges.size() == 1);
  CHECK(filtered.nodes.count(1));
  CHECK(filtered.nodes.count(2));
  CHECK(filtered.nodes.count(4));  // POI survives without incident edges
  CHECK(!filtered.nodes.count(3));
}
