#pragma once

// Shared test fixtures: store builders, randomized stores/graphs and the
// brute-force oracles the engine and analytics are checked against. The
// oracles are straight transcriptions of the definitions, independent of
// the indexed/bounded implementations they verify.

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <vector>

#include "provql/ast.hpp"
#include "provql/engine.hpp"
#include "provql/model.hpp"
#include "provql/store.hpp"

namespace provql::testing {

// --- store builders ---------------------------------------------------------

struct StoreBuilder {
  std::vector<Entity> entities;
  std::vector<Event> events;
  EventId next_event_id = 1;

  EntityId file(const std::string& host, const std::string& path) {
    Entity e;
    e.key = EntityKey::file(host, path);
    entities.push_back(e);
    return entities.size() - 1;
  }
  EntityId process(const std::string& host, std::uint64_t pid, const std::string& name) {
    Entity e;
    e.key = EntityKey::process(host, pid, name);
    entities.push_back(e);
    return entities.size() - 1;
  }
  EntityId network(const std::string& host, const std::string& sip, std::uint32_t sp,
                   const std::string& dip, std::uint32_t dp) {
    Entity e;
    e.key = EntityKey::network(host, sip, sp, dip, dp);
    entities.push_back(e);
    return entities.size() - 1;
  }

  Event& event(EntityId src, EntityId dst, OpType op, TimestampNs start, TimestampNs end,
               std::uint64_t amount = 0, const std::string& host = "1") {
    Event ev;
    ev.id = next_event_id++;
    ev.src = src;
    ev.dst = dst;
    ev.optype = op;
    ev.starttime = start;
    ev.endtime = end;
    ev.amount = amount;
    ev.host_id = host;
    events.push_back(ev);
    return events.back();
  }

  void load_into(EventStore& store) const { store.insert_batch(entities, events); }
};

// Random store: entity ids are the builder indices (dense), events between
// random distinct endpoints with random windows.
inline StoreBuilder random_store(std::uint64_t seed, std::size_t n_entities,
                                 std::size_t n_events, TimestampNs horizon = 1'000'000) {
  std::mt19937_64 rng(seed);
  StoreBuilder b;
  for (std::size_t i = 0; i < n_entities; ++i) {
    int k = static_cast<int>(rng() % 3);
    std::string host = (rng() % 2) ? "1" : "2";
    if (k == 0)
      b.file(host, "/f/" + std::to_string(i));
    else if (k == 1)
      b.process(host, 100 + i, "p" + std::to_string(i));
    else
      b.network(host, "10.0.0." + std::to_string(i % 250), 1000 + (i % 50),
                "10.0.1." + std::to_string(i % 250), 80);
  }
  std::uniform_int_distribution<TimestampNs> t_dist(0, horizon);
  std::uniform_int_distribution<TimestampNs> dur_dist(1, horizon / 20 + 1);
  std::uniform_int_distribution<std::uint64_t> amount_dist(0, 1 << 20);
  for (std::size_t i = 0; i < n_events; ++i) {
    EntityId src = rng() % n_entities;
    EntityId dst = rng() % n_entities;
    if (src == dst) dst = (dst + 1) % n_entities;
    TimestampNs s = t_dist(rng);
    b.event(src, dst, static_cast<OpType>(rng() % kOpTypeCount), s, s + dur_dist(rng),
            amount_dist(rng));
  }
  return b;
}

// --- dependency-closure oracles ----------------------------------------------
//
// Backward: keep e1(u1,v1) when a kept e2(v1,.) exists with ts(e1) < te(e2);
// the anchor acts as a virtual kept edge out of the POI node whose endtime
// is the POI event's endtime. Iterated over the full event list until the
// fixpoint.

inline std::set<EventId> backward_closure_oracle(const std::vector<Event>& all, const Event& poi,
                                                 EntityId anchor_node) {
  std::set<EventId> kept{poi.id};
  std::map<EntityId, TimestampNs> max_te_out;  // over kept edges (the "exists e2" witness)
  auto note = [&](EntityId node, TimestampNs te) {
    auto it = max_te_out.find(node);
    if (it == max_te_out.end() || te > it->second) max_te_out[node] = te;
  };
  note(poi.src, poi.endtime);
  note(anchor_node, poi.endtime);  // the anchor override
  bool changed = true;
  while (changed) {
    changed = false;
    for (const Event& e : all) {
      if (kept.count(e.id)) continue;
      auto it = max_te_out.find(e.dst);
      if (it != max_te_out.end() && e.starttime < it->second) {
        kept.insert(e.id);
        note(e.src, e.endtime);
        changed = true;
      }
    }
  }
  return kept;
}

// Forward: keep e2(u2,v2) when u2 is an entry or a kept e1(.,u2) exists with
// ts(e1) < te(e2); an optional cutoff drops any event starting at or after
// it (mirroring the global `re.starttime < T` conjunct).
inline std::set<EventId> forward_closure_oracle(const std::vector<Event>& all,
                                                const std::set<EntityId>& entries,
                                                std::optional<TimestampNs> cutoff = {}) {
  std::set<EventId> kept;
  std::map<EntityId, TimestampNs> min_ts_in;  // over kept edges
  auto admits = [&](const Event& e) {
    if (cutoff && !(e.starttime < *cutoff)) return false;
    if (entries.count(e.src)) return true;
    auto it = min_ts_in.find(e.src);
    return it != min_ts_in.end() && e.endtime > it->second;
  };
  bool changed = true;
  while (changed) {
    changed = false;
    for (const Event& e : all) {
      if (kept.count(e.id)) continue;
      if (admits(e)) {
        kept.insert(e.id);
        auto it = min_ts_in.find(e.dst);
        if (it == min_ts_in.end() || e.starttime < it->second) min_ts_in[e.dst] = e.starttime;
        changed = true;
      }
    }
  }
  return kept;
}

// --- interval-merge oracle ------------------------------------------------------
//
// Union-find over same-signature edges: two edges join when the later one
// starts within `gap` of the earlier one's end. Components equal the sweep
// implementation's merged edges.
inline std::size_t merge_count_oracle(const ProvGraph& g, TimestampNs gap) {
  std::vector<std::size_t> parent(g.edges.size());
  for (std::size_t i = 0; i < parent.size(); ++i) parent[i] = i;
  std::function<std::size_t(std::size_t)> find = [&](std::size_t x) {
    return parent[x] == x ? x : parent[x] = find(parent[x]);
  };
  for (std::size_t i = 0; i < g.edges.size(); ++i)
    for (std::size_t j = 0; j < g.edges.size(); ++j) {
      if (i == j) continue;
      const auto& a = g.edges[i];
      const auto& b = g.edges[j];
      if (a.src != b.src || a.dst != b.dst || a.optype != b.optype) continue;
      const auto& first = a.starttime <= b.starttime ? a : b;
      const auto& second = a.starttime <= b.starttime ? b : a;
      if (second.starttime - first.endtime <= gap) parent[find(i)] = find(j);
    }
  std::set<std::size_t> roots;
  for (std::size_t i = 0; i < parent.size(); ++i) roots.insert(find(i));
  return roots.size();
}

// --- propagation oracle -----------------------------------------------------------
//
// Exact solution on a DAG: process nodes in reverse topological order so
// every rel(dst) is final before rel(src) is computed.
inline std::unordered_map<EntityId, double> topo_propagate_oracle(const ProvGraph& g,
                                                                  EntityId poi) {
  std::unordered_map<EntityId, double> rel;
  for (EntityId n : g.nodes) rel[n] = 0.0;
  rel[poi] = 1.0;
  // Kahn order on the edge direction, then evaluate in reverse.
  std::unordered_map<EntityId, int> out_deg;
  for (EntityId n : g.nodes) out_deg[n] = 0;
  for (const auto& e : g.edges) out_deg[e.src]++;
  std::vector<EntityId> order;  // nodes whose out-edges are all resolved
  std::vector<EntityId> ready;
  for (auto& [n, d] : out_deg)
    if (d == 0) ready.push_back(n);
  std::sort(ready.begin(), ready.end());
  std::unordered_map<EntityId, std::vector<const GraphEdge*>> in_edges;
  for (const auto& e : g.edges) in_edges[e.dst].push_back(&e);
  std::unordered_map<EntityId, std::vector<const GraphEdge*>> out_edges;
  for (const auto& e : g.edges) out_edges[e.src].push_back(&e);
  while (!ready.empty()) {
    EntityId n = ready.back();
    ready.pop_back();
    order.push_back(n);
    if (n != poi) {
      double s = 0;
      for (const GraphEdge* e : out_edges[n]) s += e->weight.value_or(0.0) * rel[e->dst];
      rel[n] = s;
    }
    for (const GraphEdge* e : in_edges[n]) {
      if (--out_deg[e->src] == 0) ready.push_back(e->src);
    }
  }
  return rel;
}

// Random DAG with normalized out-weights; edges point from lower to higher
// node index, the POI is the highest index (a sink).
inline ProvGraph random_dag(std::uint64_t seed, std::size_t n_nodes, double edge_prob,
                            EntityId* poi_out) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  ProvGraph g;
  EventId next_id = 1;
  for (std::size_t i = 0; i < n_nodes; ++i) g.nodes.insert(i);
  for (std::size_t i = 0; i < n_nodes; ++i)
    for (std::size_t j = i + 1; j < n_nodes; ++j)
      if (unit(rng) < edge_prob) {
        GraphEdge e;
        e.src = i;
        e.dst = j;
        e.optype = OpType::Write;
        e.starttime = static_cast<TimestampNs>(i);
        e.endtime = static_cast<TimestampNs>(j);
        e.amount = 1;
        e.raw_ids = {next_id++};
        e.weight = 0.1 + unit(rng);
        g.add_edge(std::move(e));
      }
  *poi_out = n_nodes - 1;
  return g;
}

// --- AST builders ------------------------------------------------------------------

// r.starttime < max(collect(vout IN out(v) | vout.endtime))
inline ast::ExprPtr default_backward_where() {
  using namespace ast;
  auto r_start = make_expr(Expr::Prop{make_expr(Expr::Var{"r"}), "starttime"});
  auto coll = make_expr(Expr::Call{FuncKind::Out, make_expr(Expr::Var{"v"})});
  auto body = make_expr(Expr::Prop{make_expr(Expr::Var{"vout"}), "endtime"});
  auto agg = make_expr(Expr::Aggregate{AggOp::Max, "vout", coll, body});
  return make_expr(Expr::Binary{BinOp::Lt, r_start, agg});
}

// re.endtime > min(collect(uin IN in(u) | uin.starttime)) [and re.starttime < cutoff]
inline ast::ExprPtr default_forward_where(std::optional<TimestampNs> cutoff = {}) {
  using namespace ast;
  auto re_end = make_expr(Expr::Prop{make_expr(Expr::Var{"re"}), "endtime"});
  auto coll = make_expr(Expr::Call{FuncKind::In, make_expr(Expr::Var{"u"})});
  auto body = make_expr(Expr::Prop{make_expr(Expr::Var{"uin"}), "starttime"});
  auto agg = make_expr(Expr::Aggregate{AggOp::Min, "uin", coll, body});
  auto cond = make_expr(Expr::Binary{BinOp::Gt, re_end, agg});
  if (!cutoff) return cond;
  auto re_start = make_expr(Expr::Prop{make_expr(Expr::Var{"re"}), "starttime"});
  auto lim = make_expr(Expr::Binary{BinOp::Lt, re_start, make_expr(Expr::IntLit{*cutoff})});
  return make_expr(Expr::Binary{BinOp::And, cond, lim});
}

inline ast::TraverseSpec backward_spec(bool dfs = false) {
  ast::TraverseSpec s;
  s.dfs = dfs;
  s.edge_var = "r";
  s.backward = true;
  s.start_var = "f";
  s.step.node_var = "v";
  s.step.bind_fn = ast::FuncKind::Dst;
  s.step.edge_arg = "r";
  s.step.where = default_backward_where();
  return s;
}

inline ast::TraverseSpec forward_spec(std::optional<TimestampNs> cutoff = {}, bool dfs = false) {
  ast::TraverseSpec s;
  s.dfs = dfs;
  s.edge_var = "re";
  s.backward = false;
  s.start_var = "entry";
  s.step.node_var = "u";
  s.step.bind_fn = ast::FuncKind::Src;
  s.step.edge_arg = "re";
  s.step.where = default_forward_where(cutoff);
  return s;
}

inline PoiResult poi_from_event(const Event& e) {
  PoiResult p;
  p.event = e;
  p.anchor_node = e.dst;
  p.src_node = e.src;
  p.dst_node = e.dst;
  p.event_var = "st";
  p.src_var = "p";
  p.dst_var = "f";
  return p;
}

inline std::set<EventId> edge_id_set(const ProvGraph& g) {
  std::set<EventId> s;
  for (const auto& e : g.edges) s.insert(e.raw_ids.begin(), e.raw_ids.end());
  return s;
}

}  // namespace provql::testing
