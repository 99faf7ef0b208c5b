// Serial vs OpenMP kernel comparison: feature evaluation, per-node weight
// normalization and propagation sweeps over synthetic graphs, plus the
// end-to-end traversal for scale context. Run with --benchmark_filter=...
// to narrow.

#include <benchmark/benchmark.h>

#include <random>

#include "provql/analytics.hpp"
#include "provql/engine.hpp"
#include "provql/parser.hpp"
#include "provql/store.hpp"

using namespace provql;

namespace {

ProvGraph synthetic_graph(std::size_t n_edges, std::size_t n_nodes) {
  std::mt19937_64 rng(7);
  ProvGraph g;
  for (std::size_t i = 0; i < n_edges; ++i) {
    GraphEdge e;
    e.src = rng() % n_nodes;
    e.dst = rng() % n_nodes;
    if (e.src == e.dst) e.dst = (e.dst + 1) % n_nodes;
    e.optype = OpType::Write;
    e.starttime = static_cast<TimestampNs>(rng() % 1'000'000);
    e.endtime = e.starttime + 1 + static_cast<TimestampNs>(rng() % 1000);
    e.amount = rng() % 100'000;
    e.raw_ids = {i + 1};
    g.add_edge(std::move(e));
  }
  return g;
}

std::vector<ast::ExprPtr> canonical_features() {
  std::string q = "MATCH (p:Process)-[st:FileEvent{id:1}]->(f:File{name:\"/x\"})\n"
                  "BFS (r IN backward(f) | MATCH v=dst(r) WHERE r.starttime<max(collect(vout IN "
                  "out(v) | vout.endtime))) YIELD g1\nUNWIND g1 AS e\nSET e.weight=projection("
                  "1/(abs(r.amount-st.amount)+0.0001),"
                  "ln(1+1/abs(r.endtime-st.endtime)),"
                  "count(out(v))/count(in(v)))\nRETURN g1";
  auto r = parse_query(q);
  return std::get<ast::SetWeightStage>(
             std::get<ast::QueryAst>(r).sub_queries[0].pipelines[0].stages[2])
      .features;
}

ReduceEval weighted_sum_reduce() {
  using namespace ast;
  ReduceEval spec;
  spec.acc_name = "sum";
  spec.iter_var = "o";
  spec.node_var = "u";
  auto sum = make_expr(Expr::Var{"sum"});
  auto w = make_expr(Expr::Prop{make_expr(Expr::Var{"o"}), "weight"});
  auto rel = make_expr(
      Expr::Prop{make_expr(Expr::Call{FuncKind::Dst, make_expr(Expr::Var{"o"})}), "rel"});
  spec.body =
      make_expr(Expr::Binary{BinOp::Add, sum, make_expr(Expr::Binary{BinOp::Mul, w, rel})});
  return spec;
}

void bench_features(benchmark::State& state, ExecMode mode) {
  auto n = static_cast<std::size_t>(state.range(0));
  auto g = synthetic_graph(n, n / 8 + 2);
  GraphEdge poi;
  poi.src = 1;
  poi.dst = 2;
  poi.amount = 33'784;
  poi.endtime = 2'000'000;
  poi.raw_ids = {0};
  GraphAdjacency adj(g);
  GraphView view(g, adj);
  FeatureContext ctx;
  ctx.poi_edge = &poi;
  ctx.edge_vars = {"e", "r"};
  ctx.step_node_var = "v";
  ctx.step_bind = ast::FuncKind::Dst;
  ctx.adjacency = &view;
  auto features = canonical_features();
  for (auto _ : state) {
    auto m = compute_features(g, ctx, features, mode);
    benchmark::DoNotOptimize(m.data.data());
  }
  state.SetItemsProcessed(state.iterations() * n);
}

void bench_normalize(benchmark::State& state, ExecMode mode) {
  auto n = static_cast<std::size_t>(state.range(0));
  auto g = synthetic_graph(n, n / 8 + 2);
  for (auto& e : g.edges) e.weight = 0.5;
  for (auto _ : state) {
    ProvGraph copy = g;
    normalize_outgoing(copy, mode);
    benchmark::DoNotOptimize(copy.edges.data());
  }
  state.SetItemsProcessed(state.iterations() * n);
}

void bench_propagate(benchmark::State& state, ExecMode mode) {
  auto n = static_cast<std::size_t>(state.range(0));
  // Layered DAG so the iteration count is stable across sizes.
  std::mt19937_64 rng(11);
  ProvGraph g;
  std::size_t layers = 20, width = n / layers + 1;
  EventId id = 1;
  for (std::size_t l = 0; l + 1 < layers; ++l) {
    for (std::size_t i = 0; i < width; ++i) {
      GraphEdge e;
      e.src = l * width + i;
      e.dst = (l + 1) * width + rng() % width;
      e.optype = OpType::Write;
      e.raw_ids = {id++};
      e.weight = 1.0;
      g.add_edge(std::move(e));
    }
  }
  EntityId poi = (layers - 1) * width;
  g.nodes.insert(poi);
  normalize_outgoing(g, ExecMode::Serial);
  auto spec = weighted_sum_reduce();
  for (auto _ : state) {
    auto r = propagate(g, spec, poi, 1e-13, 100, mode);
    benchmark::DoNotOptimize(r.scores.size());
  }
  state.SetItemsProcessed(state.iterations() * g.edges.size());
}

void bench_backward_search(benchmark::State& state) {
  // Traversal cost on a layered store; sequential by contract.
  auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(13);
  std::vector<Entity> entities;
  std::vector<Event> events;
  std::size_t n_nodes = n / 4 + 8;
  for (std::size_t i = 0; i < n_nodes; ++i) {
    Entity e;
    e.key = EntityKey::file("1", "/n/" + std::to_string(i));
    entities.push_back(e);
  }
  for (std::size_t i = 0; i + 1 < n; ++i) {
    Event ev;
    ev.id = i + 1;
    ev.src = rng() % n_nodes;
    ev.dst = rng() % n_nodes;
    if (ev.src == ev.dst) ev.dst = (ev.dst + 1) % n_nodes;
    ev.optype = OpType::Write;
    ev.starttime = static_cast<TimestampNs>(i * 10);
    ev.endtime = ev.starttime + 15;
    ev.host_id = "1";
    events.push_back(ev);
  }
  Event poi;
  poi.id = n;
  poi.src = 0;
  poi.dst = 1;
  poi.optype = OpType::Write;
  poi.starttime = static_cast<TimestampNs>(n * 10);
  poi.endtime = poi.starttime + 15;
  poi.host_id = "1";
  events.push_back(poi);
  MemoryStore store;
  store.insert_batch(entities, events);

  ast::TraverseSpec spec;
  spec.edge_var = "r";
  spec.backward = true;
  spec.start_var = "f";
  spec.step.node_var = "v";
  spec.step.bind_fn = ast::FuncKind::Dst;
  spec.step.edge_arg = "r";
  {
    using namespace ast;
    auto r_start = make_expr(Expr::Prop{make_expr(Expr::Var{"r"}), "starttime"});
    auto coll = make_expr(Expr::Call{FuncKind::Out, make_expr(Expr::Var{"v"})});
    auto body = make_expr(Expr::Prop{make_expr(Expr::Var{"vout"}), "endtime"});
    auto agg = make_expr(Expr::Aggregate{AggOp::Max, "vout", coll, body});
    spec.step.where = make_expr(Expr::Binary{BinOp::Lt, r_start, agg});
  }
  PoiResult pr;
  pr.event = poi;
  pr.anchor_node = poi.dst;
  pr.src_node = poi.src;
  pr.dst_node = poi.dst;
  pr.event_var = "st";
  pr.src_var = "p";
  pr.dst_var = "f";

  for (auto _ : state) {
    auto g = backward_search(pr, spec, store, Limits{});
    benchmark::DoNotOptimize(g.edges.size());
  }
  state.SetItemsProcessed(state.iterations() * n);
}

}  // namespace

BENCHMARK_CAPTURE(bench_features, serial, ExecMode::Serial)->Arg(1000)->Arg(10000);
BENCHMARK_CAPTURE(bench_features, parallel, ExecMode::Parallel)->Arg(1000)->Arg(10000);
BENCHMARK_CAPTURE(bench_normalize, serial, ExecMode::Serial)->Arg(1000)->Arg(10000);
BENCHMARK_CAPTURE(bench_normalize, parallel, ExecMode::Parallel)->Arg(1000)->Arg(10000);
BENCHMARK_CAPTURE(bench_propagate, serial, ExecMode::Serial)->Arg(2000)->Arg(20000);
BENCHMARK_CAPTURE(bench_propagate, parallel, ExecMode::Parallel)->Arg(2000)->Arg(20000);
BENCHMARK(bench_backward_search)->Arg(5000)->Arg(50000);

BENCHMARK_MAIN();
