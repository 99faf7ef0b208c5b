#include "provql/engine.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <deque>
#include <future>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "provql/algebra.hpp"

namespace provql {

using namespace ast;

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

[[noreturn]] void raise(const std::string& msg) { throw EngineError{msg}; }

std::optional<EntityKind> kind_from_label(const std::string& label) {
  std::string l;
  for (char c : label) l.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (l == "process") return EntityKind::Process;
  if (l == "file") return EntityKind::File;
  if (l == "network") return EntityKind::Network;
  return std::nullopt;
}

// Event categories follow the non-process endpoint.
enum class EventCategory { File, Process, Network };

EventCategory event_category(const Event& e, const EventStore& store) {
  auto src = store.entity_by_id(e.src);
  auto dst = store.entity_by_id(e.dst);
  auto k1 = src ? src->key.kind : EntityKind::Process;
  auto k2 = dst ? dst->key.kind : EntityKind::Process;
  if (k1 == EntityKind::Network || k2 == EntityKind::Network) return EventCategory::Network;
  if (k1 == EntityKind::File || k2 == EntityKind::File) return EventCategory::File;
  return EventCategory::Process;
}

std::optional<EventCategory> category_from_label(const std::string& label) {
  std::string l;
  for (char c : label) l.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (l == "fileevent") return EventCategory::File;
  if (l == "processevent") return EventCategory::Process;
  if (l == "networkevent") return EventCategory::Network;
  return std::nullopt;
}

EndpointPattern endpoint_from_node(const NodePattern& n) {
  EndpointPattern p;
  p.kind = kind_from_label(n.label);
  for (const auto& c : n.props) {
    if (auto* s = std::get_if<std::string>(&c.value))
      p.attrs[c.key] = *s;
    else
      p.attrs[c.key] = std::to_string(std::get<std::int64_t>(c.value));
  }
  return p;
}

}  // namespace

PoiResult locate_poi(const PoiMatch& match, const EventStore& store) {
  EventPattern pattern;
  pattern.src = endpoint_from_node(match.src);
  pattern.dst = endpoint_from_node(match.dst);
  bool id_bound = false;
  for (const auto& c : match.edge.props) {
    if (c.key == "id") {
      if (auto* v = std::get_if<std::int64_t>(&c.value)) {
        pattern.id = static_cast<EventId>(*v);
        id_bound = true;
      } else {
        raise("edge id property must be an integer");
      }
    } else if (c.key == "optype") {
      auto* s = std::get_if<std::string>(&c.value);
      if (!s) raise("optype property must be a string");
      auto op = optype_from_string(*s);
      if (!op) raise("unknown optype in POI pattern: " + *s);
      pattern.optype = *op;
    } else if (c.key == "hostid") {
      if (auto* s = std::get_if<std::string>(&c.value)) pattern.host_id = *s;
    } else {
      raise("unsupported edge property in POI pattern: " + c.key);
    }
  }

  auto category = category_from_label(match.edge.label);
  auto candidates = store.find_events(pattern);
  if (category) {
    std::vector<Event> filtered;
    for (const auto& e : candidates)
      if (event_category(e, store) == *category) filtered.push_back(e);
    candidates = std::move(filtered);
  }

  if (candidates.empty()) raise("POI not found");
  if (candidates.size() > 1 && !id_bound) {
    std::ostringstream os;
    os << "ambiguous POI: " << candidates.size() << " events match (ids";
    for (std::size_t i = 0; i < candidates.size() && i < 10; ++i) os << " " << candidates[i].id;
    if (candidates.size() > 10) os << " ...";
    os << "); bind an id to disambiguate";
    raise(os.str());
  }

  PoiResult r;
  r.event = candidates.front();
  r.src_node = r.event.src;
  r.dst_node = r.event.dst;
  r.event_var = match.edge.var;
  r.src_var = match.src.var;
  r.dst_var = match.dst.var;
  r.anchor_node = r.dst_node;
  return r;
}

// --- traversal -------------------------------------------------------------------

namespace {

constexpr TimestampNs kMinusInf = std::numeric_limits<TimestampNs>::min();

// Discovered-graph state. Edges live in a deque so EdgeRef pointers handed
// to the evaluator stay stable as the graph grows.
class Traversal : public AdjacencyView {
 public:
  Traversal(const EventStore& store, const TraverseSpec& spec, const Limits& limits, bool backward)
      : store_(store), spec_(spec), limits_(limits), backward_(backward) {}

  EdgeList out(EntityId u) const override {
    EdgeList r;
    if (auto it = out_.find(u); it != out_.end()) r = it->second;
    if (auto it = extra_out_.find(u); it != extra_out_.end())
      r.insert(r.end(), it->second.begin(), it->second.end());
    return r;
  }
  EdgeList in(EntityId v) const override {
    EdgeList r;
    if (auto it = in_.find(v); it != in_.end()) r = it->second;
    if (auto it = extra_in_.find(v); it != extra_in_.end())
      r.insert(r.end(), it->second.begin(), it->second.end());
    return r;
  }

  // Anchor seeding for a backward search: the POI edge joins the graph and
  // is also listed among the anchor's out-edges, which realizes the
  // "initial bound = POI endtime" override uniformly in the WHERE's
  // aggregates.
  void seed_backward(const PoiResult& poi) {
    const GraphEdge* e = accept(GraphEdge::from_event(poi.event));
    // The POI edge already sits in out(src); list it for the anchor node
    // only when the anchor is not the source itself.
    if (poi.anchor_node != poi.event.src) extra_out_[poi.anchor_node].push_back(e);
    relax_bound(poi.anchor_node, poi.event.endtime);
    relax_bound(poi.event.src, poi.event.endtime);
    depth_[poi.anchor_node] = 0;
    depth_[poi.event.src] = 1;
    binding_.set(poi.event_var, EdgeRef{e});
    binding_.set(poi.src_var, EntityRef{poi.event.src});
    binding_.set(poi.dst_var, EntityRef{poi.event.dst});
  }

  // Entry nodes admit all their out-edges: a virtual in-edge at the minimum
  // representable time keeps min-aggregates from ever tightening past it.
  void seed_forward(const std::vector<EntityId>& entries) {
    for (EntityId u : entries) {
      sentinels_.push_back(GraphEdge{});
      GraphEdge& s = sentinels_.back();
      s.src = u;
      s.dst = u;
      s.starttime = kMinusInf;
      s.endtime = kMinusInf;
      s.raw_ids = {0};
      extra_in_[u].push_back(&s);
      relax_bound(u, kMinusInf);
      depth_[u] = 0;
    }
  }

  ProvGraph run() {
    binding_.adjacency = this;
    binding_.store = &store_;
    while (!frontier_.empty() && !truncated_) {
      EntityId v;
      if (spec_.dfs) {
        v = frontier_.back();
        frontier_.pop_back();
      } else {
        v = frontier_.front();
        frontier_.pop_front();
      }
      queued_.erase(v);
      expand(v);
    }
    ProvGraph g;
    g.truncated = truncated_;
    for (const auto& e : edges_) g.add_edge(e);
    return g;
  }

 private:
  const GraphEdge* accept(GraphEdge e) {
    edges_.push_back(std::move(e));
    const GraphEdge* p = &edges_.back();
    out_[p->src].push_back(p);
    in_[p->dst].push_back(p);
    nodes_.insert(p->src);
    nodes_.insert(p->dst);
    for (EventId id : p->raw_ids) seen_.insert(id);
    if (edges_.size() > limits_.max_edges || nodes_.size() > limits_.max_nodes) truncated_ = true;
    return p;
  }

  void relax_bound(EntityId n, TimestampNs t) {
    auto it = bounds_.find(n);
    bool relaxed;
    if (it == bounds_.end()) {
      bounds_[n] = t;
      relaxed = true;
    } else if (backward_ ? t > it->second : t < it->second) {
      it->second = t;
      relaxed = true;
    } else {
      relaxed = false;
    }
    if (relaxed && !queued_.count(n)) {
      frontier_.push_back(n);
      queued_.insert(n);
    }
  }

  void expand(EntityId v) {
    auto bound_it = bounds_.find(v);
    if (bound_it == bounds_.end()) return;
    TimestampNs bound = bound_it->second;

    if (limits_.max_depth > 0) {
      auto d = depth_.find(v);
      if (d != depth_.end() && d->second >= limits_.max_depth) {
        truncated_ = true;
        return;
      }
    }

    // Fetch only the delta between the previously expanded bound and the
    // current one, so each event is yielded at most once per node.
    std::vector<Event> candidates;
    auto prev = expanded_.find(v);
    if (backward_) {
      if (prev == expanded_.end())
        candidates = store_.incoming(v, TimePredicate::start_before(bound));
      else if (bound > prev->second)
        candidates = store_.incoming(v, TimePredicate::window(prev->second, bound));
      else
        return;
    } else {
      if (prev == expanded_.end())
        candidates = store_.outgoing(v, TimePredicate::end_after(bound));
      else if (bound < prev->second)
        candidates = store_.outgoing(v, TimePredicate::window(bound, prev->second));
      else
        return;
    }
    expanded_[v] = bound;

    int next_depth = depth_.count(v) ? depth_[v] + 1 : 1;
    for (const Event& ev : candidates) {
      if (truncated_) break;
      if (seen_.count(ev.id)) continue;
      GraphEdge tmp = GraphEdge::from_event(ev);
      Binding b = binding_;
      b.set(spec_.edge_var, EdgeRef{&tmp});
      b.set(spec_.step.node_var,
            EntityRef{spec_.step.bind_fn == FuncKind::Src ? tmp.src : tmp.dst});
      auto r = eval(*spec_.step.where, b);
      if (auto* err = std::get_if<EvalError>(&r))
        raise("traversal WHERE failed: " + err->message);
      if (!value_truthy(std::get<Value>(r))) continue;

      const GraphEdge* kept = accept(std::move(tmp));
      EntityId grow = backward_ ? kept->src : kept->dst;
      if (!depth_.count(grow) || depth_[grow] > next_depth) depth_[grow] = next_depth;
      relax_bound(grow, backward_ ? kept->endtime : kept->starttime);
    }
  }

  const EventStore& store_;
  const TraverseSpec& spec_;
  const Limits& limits_;
  bool backward_;

  std::deque<GraphEdge> edges_;
  std::deque<GraphEdge> sentinels_;
  std::unordered_map<EntityId, EdgeList> out_, in_;
  std::unordered_map<EntityId, EdgeList> extra_out_, extra_in_;
  std::unordered_set<EntityId> nodes_;
  std::unordered_set<EventId> seen_;
  std::unordered_map<EntityId, TimestampNs> bounds_;
  std::unordered_map<EntityId, TimestampNs> expanded_;
  std::unordered_map<EntityId, int> depth_;
  std::deque<EntityId> frontier_;
  std::unordered_set<EntityId> queued_;
  Binding binding_;
  bool truncated_ = false;
};

}  // namespace

ProvGraph backward_search(const PoiResult& poi, const TraverseSpec& spec, const EventStore& store,
                          const Limits& limits) {
  if (!spec.backward) raise("backward_search called with a forward spec");
  Traversal t(store, spec, limits, /*backward=*/true);
  t.seed_backward(poi);
  return t.run();
}

ProvGraph forward_search(const std::vector<EntityId>& entries, const TraverseSpec& spec,
                         const EventStore& store, const Limits& limits) {
  if (spec.backward) raise("forward_search called with a backward spec");
  if (entries.empty()) raise("no entries to search forward from");
  Traversal t(store, spec, limits, /*backward=*/false);
  t.seed_forward(entries);
  return t.run();
}

// --- entry selection ----------------------------------------------------------------

std::vector<EntityId> select_entries(const ProvGraph& g, const EntryMatch& spec,
                                     const EventStore& store) {
  GraphAdjacency adj(g);
  GraphView view(g, adj);
  std::vector<EntityId> nodes(g.nodes.begin(), g.nodes.end());
  std::sort(nodes.begin(), nodes.end());

  struct Scored {
    EntityId id;
    double key;
  };
  std::vector<Scored> passing;
  for (EntityId n : nodes) {
    Binding b;
    b.adjacency = &view;
    b.scores = &g.scores;
    b.store = &store;
    b.set(spec.node_var, EntityRef{n});
    auto r = eval(*spec.filter, b);
    if (auto* err = std::get_if<EvalError>(&r)) raise("entry filter failed: " + err->message);
    if (!value_truthy(std::get<Value>(r))) continue;
    double key = 0.0;
    if (spec.order_key) {
      auto k = eval(*spec.order_key, b);
      if (auto* err = std::get_if<EvalError>(&k)) raise("entry order key failed: " + err->message);
      if (!value_is_numeric(std::get<Value>(k))) raise("entry order key must be numeric");
      key = value_as_double(std::get<Value>(k));
    }
    passing.push_back({n, key});
  }
  std::stable_sort(passing.begin(), passing.end(), [&](const Scored& a, const Scored& b) {
    if (a.key != b.key) return spec.descending ? a.key > b.key : a.key < b.key;
    return a.id < b.id;
  });
  std::size_t k = passing.size();
  if (spec.limit) k = std::min<std::size_t>(k, static_cast<std::size_t>(*spec.limit));
  std::vector<EntityId> out;
  for (std::size_t i = 0; i < k; ++i) out.push_back(passing[i].id);
  return out;
}

// --- execution ------------------------------------------------------------------------

namespace {

struct SubQueryRun {
  const EventStore& store;
  const EngineConfig& cfg;
  SubQueryReport report;
  std::map<std::string, ProvGraph> named;             // yield name -> graph
  std::map<std::string, std::string> graph_of_edge;   // edge var -> yield name
  std::optional<PoiResult> poi;
  TraverseSpec first_traverse_spec;  // for feature bindings (v = dst(r))

  void stage_done(const char* name, Clock::time_point t0, const ProvGraph* g,
                  std::string detail = {}) {
    StageReport s;
    s.stage = name;
    s.millis = ms_since(t0);
    if (g) {
      s.edges = g->edges.size();
      s.nodes = g->nodes.size();
      s.truncated = g->truncated;
    }
    s.detail = std::move(detail);
    report.stages.push_back(std::move(s));
  }

  ProvGraph& named_graph(const std::string& name) {
    auto it = named.find(name);
    if (it == named.end()) raise("unknown graph: " + name);
    return it->second;
  }

  ProvGraph run_pipeline(const Pipeline& pipe) {
    std::string current;           // graph the follow-up stages operate on
    std::string unwind_var;        // e
    ProvGraph result;
    bool have_result = false;

    if (auto* pm = std::get_if<PoiMatch>(&pipe.anchor)) {
      auto t0 = Clock::now();
      poi = locate_poi(*pm, store);
      stage_done("locate_poi", t0, nullptr, "event " + std::to_string(poi->event.id));
    }

    for (const auto& stage : pipe.stages) {
      if (auto* t = std::get_if<TraverseStage>(&stage)) {
        auto t0 = Clock::now();
        ProvGraph g;
        if (t->spec.backward) {
          if (!poi) raise("backward traversal without a POI match");
          // Anchor at whichever POI node the query names.
          PoiResult anchored = *poi;
          if (t->spec.start_var == poi->src_var)
            anchored.anchor_node = poi->src_node;
          else if (t->spec.start_var == poi->dst_var)
            anchored.anchor_node = poi->dst_node;
          else
            raise("backward start variable must name a POI node: " + t->spec.start_var);
          g = backward_search(anchored, t->spec, store, cfg.limits);
          report.backward_edges += g.edges.size();
          report.truncated = report.truncated || g.truncated;
          stage_done("backward_traversal", t0, &g);
          first_traverse_spec = t->spec;
        } else {
          std::vector<EntityId> seeds;
          if (auto it = entries.find(t->spec.start_var); it != entries.end()) {
            seeds = it->second;
          } else if (poi && t->spec.start_var == poi->dst_var) {
            seeds = {poi->dst_node};
          } else if (poi && t->spec.start_var == poi->src_var) {
            seeds = {poi->src_node};
          } else {
            raise("forward start variable is unbound: " + t->spec.start_var);
          }
          g = forward_search(seeds, t->spec, store, cfg.limits);
          report.forward_edges += g.edges.size();
          report.truncated = report.truncated || g.truncated;
          stage_done("forward_traversal", t0, &g);
        }
        graph_of_edge[t->spec.edge_var] = t->yield_name;
        named[t->yield_name] = std::move(g);
        current = t->yield_name;
      } else if (auto* u = std::get_if<UnwindStage>(&stage)) {
        current = u->graph;
        unwind_var = u->edge_var;
      } else if (auto* w = std::get_if<SetWeightStage>(&stage)) {
        auto t0 = Clock::now();
        ProvGraph& g = named_graph(current);
        ProvGraph merged = merge_parallel_edges(g, cfg.merge_gap_ns);
        report.merged_edges += merged.edges.size();
        stage_done("edge_merge", t0, &merged);

        t0 = Clock::now();
        if (!poi) raise("weighting requires a POI match");
        GraphEdge poi_edge = GraphEdge::from_event(poi->event);
        GraphAdjacency adj(merged);
        GraphView view(merged, adj);
        FeatureContext ctx;
        ctx.poi_edge = &poi_edge;
        ctx.poi_var = poi->event_var;
        ctx.edge_vars = {w->target_var};
        if (!unwind_var.empty() && unwind_var != w->target_var)
          ctx.edge_vars.push_back(unwind_var);
        if (!first_traverse_spec.edge_var.empty() &&
            first_traverse_spec.edge_var != w->target_var)
          ctx.edge_vars.push_back(first_traverse_spec.edge_var);
        ctx.step_node_var = first_traverse_spec.step.node_var;
        ctx.step_bind = first_traverse_spec.step.bind_fn;
        ctx.extra_nodes = {{poi->src_var, poi->src_node}, {poi->dst_var, poi->dst_node}};
        ctx.adjacency = &view;
        ctx.store = &store;
        ExecMode mode = cfg.parallel_kernels ? ExecMode::Parallel : ExecMode::Serial;
        try {
          WeightingResult wr = assign_weights(merged, ctx, w->features, cfg.seed,
                                              /*normalize=*/true, mode);
          if (wr.uniform_fallback) {
            report.model_dump = "{\"uniform\":true}";
          } else {
            report.model_dump = wr.model.dump_json();
            if (cfg.emit_prenorm_weights) {
              nlohmann::json pj = wr.pre_normalization;
              report.model_dump.pop_back();  // splice into the model object
              report.model_dump += ",\"pre_normalization\":" + pj.dump() + "}";
            }
          }
        } catch (const std::exception& ex) {
          raise(std::string("weighting failed: ") + ex.what());
        }
        named[current] = std::move(merged);
        stage_done("weighting", t0, &named[current]);
      } else if (auto* r = std::get_if<SetRelStage>(&stage)) {
        auto t0 = Clock::now();
        ProvGraph& g = named_graph(current);
        if (!poi) raise("propagation requires a POI match");
        ReduceEval spec;
        spec.acc_name = r->acc_name;
        spec.init = r->init;
        spec.iter_var = r->iter_var;
        spec.node_var = r->bind_var;
        spec.body = r->body;
        spec.store = &store;
        ExecMode mode = cfg.parallel_kernels ? ExecMode::Parallel : ExecMode::Serial;
        try {
          auto pr = propagate(g, spec, poi->dst_node, cfg.epsilon, cfg.max_iters, mode);
          g.scores = std::move(pr.scores);
          g.propagation_converged = pr.converged;
          report.propagation_converged = report.propagation_converged && pr.converged;
          stage_done("propagation", t0, &g, "iterations " + std::to_string(pr.iterations));
        } catch (const std::exception& ex) {
          raise(std::string("propagation failed: ") + ex.what());
        }
      } else if (std::get_if<GenericSetStage>(&stage)) {
        raise("unsupported construct: general SET expression");
      } else if (auto* f = std::get_if<WeightFilterStage>(&stage)) {
        auto t0 = Clock::now();
        ProvGraph& g = named_graph(current);
        try {
          ProvGraph filtered = filter_by_weight(
              g, *f->predicate, f->var, poi ? std::optional<EntityId>(poi->dst_node) : std::nullopt,
              &store);
          report.has_weight_filter = true;
          report.filtered_edges = filtered.edges.size();
          named[current] = std::move(filtered);
          stage_done("weight_filter", t0, &named[current]);
        } catch (const std::exception& ex) {
          raise(std::string("weight filter failed: ") + ex.what());
        }
      } else if (auto* ret = std::get_if<ReturnStage>(&stage)) {
        result = named_graph(ret->graph);
        have_result = true;
      }
    }
    if (!have_result) raise("pipeline returned no graph");
    return result;
  }

  ProvGraph run(const SubQuery& sq) {
    std::vector<ProvGraph> results;
    for (const auto& pipe : sq.pipelines) {
      if (auto* eb = std::get_if<EntryBinding>(&pipe.anchor)) {
        auto t0 = Clock::now();
        auto src_it = graph_of_edge.find(eb->match.graph_arg);
        if (src_it == graph_of_edge.end())
          raise("nodes(" + eb->match.graph_arg + ") does not name a traversal result");
        const ProvGraph& source = named_graph(src_it->second);
        auto picked = select_entries(source, eb->match, store);
        if (picked.empty()) raise("no entries selected");
        report.entry_count += picked.size();
        entries[eb->name] = picked;
        StageReport s;
        s.stage = "select_entries";
        s.millis = ms_since(t0);
        s.edges = 0;
        s.nodes = picked.size();
        report.stages.push_back(std::move(s));
      }
      results.push_back(run_pipeline(pipe));
    }
    ProvGraph folded = std::move(results.front());
    for (std::size_t i = 1; i < results.size(); ++i) {
      auto t0 = Clock::now();
      folded = sq.inner_merges[i - 1] == MergeOp::Intersect
                   ? graph_intersect(folded, store, results[i], store)
                   : graph_union(folded, store, results[i], store);
      stage_done(sq.inner_merges[i - 1] == MergeOp::Intersect ? "intersect" : "union", t0,
                 &folded);
    }
    report.pg_edges = folded.edges.size();
    return folded;
  }

  std::map<std::string, std::vector<EntityId>> entries;
};

}  // namespace

ExecuteResult execute(const QueryAst& ast, const EventStore& store, const EngineConfig& config) {
  auto t0 = Clock::now();
  store.reset_fetch_count();

  ExecuteResult out;
  std::vector<ProvGraph> finals(ast.sub_queries.size());
  std::vector<SubQueryReport> reports(ast.sub_queries.size());
  std::vector<std::map<std::string, ProvGraph>> named(ast.sub_queries.size());

  auto run_one = [&](std::size_t i) {
    SubQueryRun run{store, config, {}, {}, {}, std::nullopt, {}, {}};
    finals[i] = run.run(ast.sub_queries[i]);
    reports[i] = std::move(run.report);
    named[i] = std::move(run.named);
  };

  if (config.parallel_subqueries && ast.sub_queries.size() > 1) {
    std::vector<std::future<void>> futures;
    for (std::size_t i = 0; i < ast.sub_queries.size(); ++i)
      futures.push_back(std::async(std::launch::async, run_one, i));
    for (auto& f : futures) f.get();
  } else {
    for (std::size_t i = 0; i < ast.sub_queries.size(); ++i) run_one(i);
  }

  ProvGraph folded = std::move(finals.front());
  for (std::size_t i = 1; i < finals.size(); ++i) {
    folded = ast.merges[i - 1] == MergeOp::Union ? graph_union(folded, store, finals[i], store)
                                                 : graph_intersect(folded, store, finals[i], store);
  }

  out.graph = std::move(folded);
  out.report.sub_queries = std::move(reports);
  out.report.final_edges = out.graph.edges.size();
  out.report.final_nodes = out.graph.nodes.size();
  out.report.fetch_count = store.fetch_count();
  out.report.total_millis = ms_since(t0);
  for (auto& m : named)
    for (auto& [name, g] : m) out.named_graphs[name] = std::move(g);
  return out;
}

// --- report serialization ----------------------------------------------------------

std::string ExecutionReport::to_json() const {
  nlohmann::json j;
  j["final_edges"] = final_edges;
  j["final_nodes"] = final_nodes;
  j["fetch_count"] = fetch_count;
  j["total_millis"] = total_millis;
  j["sub_queries"] = nlohmann::json::array();
  for (const auto& sq : sub_queries) {
    nlohmann::json s;
    s["backward_pa_edges"] = sq.backward_edges;
    s["merged_edges"] = sq.merged_edges;
    if (sq.has_weight_filter) s["filtered_edges"] = sq.filtered_edges;
    s["forward_pa_edges"] = sq.forward_edges;
    s["top_nodes"] = sq.entry_count;
    s["pg_edges"] = sq.pg_edges;
    s["propagation_converged"] = sq.propagation_converged;
    s["truncated"] = sq.truncated;
    if (!sq.model_dump.empty())
      s["projection_model"] = nlohmann::json::parse(sq.model_dump, nullptr, false);
    s["stages"] = nlohmann::json::array();
    for (const auto& st : sq.stages) {
      nlohmann::json sj;
      sj["stage"] = st.stage;
      sj["edges"] = st.edges;
      sj["nodes"] = st.nodes;
      sj["millis"] = st.millis;
      if (st.truncated) sj["truncated"] = true;
      if (!st.detail.empty()) sj["detail"] = st.detail;
      s["stages"].push_back(std::move(sj));
    }
    j["sub_queries"].push_back(std::move(s));
  }
  return j.dump(2);
}

std::string ExecutionReport::summary() const {
  std::ostringstream os;
  for (std::size_t i = 0; i < sub_queries.size(); ++i) {
    const auto& sq = sub_queries[i];
    os << "sub-query " << (i + 1) << ": backward PA edges " << sq.backward_edges;
    if (sq.merged_edges) os << ", merged " << sq.merged_edges;
    if (sq.has_weight_filter) os << ", after weight filter " << sq.filtered_edges;
    if (sq.entry_count) os << ", top nodes " << sq.entry_count;
    if (sq.forward_edges) os << ", forward PA edges " << sq.forward_edges;
    os << ", PG edges " << sq.pg_edges;
    if (!sq.propagation_converged) os << " (propagation not converged)";
    if (sq.truncated) os << " (truncated)";
    os << "\n";
  }
  os << "final PG: " << final_edges << " edges, " << final_nodes << " nodes; events fetched "
     << fetch_count << "; " << total_millis << " ms\n";
  return os.str();
}

}  // namespace provql
