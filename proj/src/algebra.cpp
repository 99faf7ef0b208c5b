#include "provql/algebra.hpp"

#include <algorithm>
#include <map>
#include <sstream>
#include <stdexcept>

#include "provql/json_io.hpp"

namespace provql {

bool Signature::operator==(const Signature& o) const {
  return optype == o.optype && src == o.src && dst == o.dst;
}

bool Signature::operator<(const Signature& o) const {
  if (!(src == o.src)) return src < o.src;
  if (!(dst == o.dst)) return dst < o.dst;
  return static_cast<int>(optype) < static_cast<int>(o.optype);
}

std::string Signature::canonical() const {
  return src.canonical() + ">" + dst.canonical() + ">" + to_string(optype);
}

Signature edge_signature(const GraphEdge& e, const EventStore& store) {
  auto src = store.entity_by_id(e.src);
  auto dst = store.entity_by_id(e.dst);
  if (!src || !dst) throw std::runtime_error("edge endpoint missing from store");
  return Signature{src->key, dst->key, e.optype};
}

namespace {

EntityId resolve_in(const EventStore& s, const EntityKey& key) {
  auto id = s.entity_id_by_key(key);
  if (!id) throw std::runtime_error("entity missing from the output store: " + key.canonical());
  return *id;
}

// Rewrites an edge of (g2, s2) into s1's id space.
GraphEdge remap_edge(const GraphEdge& e, const EventStore& s2, const EventStore& s1) {
  GraphEdge out = e;
  auto src = s2.entity_by_id(e.src);
  auto dst = s2.entity_by_id(e.dst);
  if (!src || !dst) throw std::runtime_error("edge endpoint missing from store");
  out.src = resolve_in(s1, src->key);
  out.dst = resolve_in(s1, dst->key);
  return out;
}

std::vector<EventId> sorted_ids(const GraphEdge& e) {
  auto ids = e.raw_ids;
  std::sort(ids.begin(), ids.end());
  return ids;
}

}  // namespace

ProvGraph graph_union(const ProvGraph& g1, const EventStore& s1, const ProvGraph& g2,
                      const EventStore& s2) {
  struct Slot {
    std::vector<GraphEdge> edges;      // deduped by raw id set
    std::vector<int> side;             // bitmask: 1 = left, 2 = right
  };
  std::map<Signature, Slot> slots;

  auto add = [&](const GraphEdge& e, const Signature& sig, int side_bit) {
    auto& slot = slots[sig];
    auto ids = sorted_ids(e);
    for (std::size_t i = 0; i < slot.edges.size(); ++i) {
      if (sorted_ids(slot.edges[i]) == ids) {
        slot.side[i] |= side_bit;
        if (e.weight &&
            (!slot.edges[i].weight || *e.weight > *slot.edges[i].weight))
          slot.edges[i].weight = e.weight;
        return;
      }
    }
    slot.edges.push_back(e);
    slot.side.push_back(side_bit);
  };

  for (const auto& e : g1.edges) add(e, edge_signature(e, s1), 1);
  for (const auto& e : g2.edges) add(remap_edge(e, s2, s1), edge_signature(e, s2), 2);

  ProvGraph out;
  out.truncated = g1.truncated || g2.truncated;
  for (auto& [sig, slot] : slots) {
    bool cross = false;
    if (slot.edges.size() > 1) {
      bool left = false, right = false;
      for (int s : slot.side) {
        if (s & 1) left = true;
        if (s & 2) right = true;
      }
      // Only fuse when both inputs contributed non-identical edges under
      // this signature; a multi-edge group from one side keeps its shape.
      for (int s : slot.side) cross = cross || (left && right && s != 3);
    }
    if (cross) {
      GraphEdge fused = slot.edges.front();
      for (std::size_t i = 1; i < slot.edges.size(); ++i) {
        const auto& e = slot.edges[i];
        fused.starttime = std::min(fused.starttime, e.starttime);
        fused.endtime = std::max(fused.endtime, e.endtime);
        fused.amount += e.amount;
        fused.raw_count += e.raw_count;
        fused.raw_ids.insert(fused.raw_ids.end(), e.raw_ids.begin(), e.raw_ids.end());
        if (e.weight && (!fused.weight || *e.weight > *fused.weight)) fused.weight = e.weight;
      }
      std::sort(fused.raw_ids.begin(), fused.raw_ids.end());
      fused.raw_ids.erase(std::unique(fused.raw_ids.begin(), fused.raw_ids.end()),
                          fused.raw_ids.end());
      out.add_edge(std::move(fused));
    } else {
      for (auto& e : slot.edges) out.add_edge(std::move(e));
    }
  }

  // Scores merge by max, expressed in s1's id space.
  for (const auto& [node, score] : g1.scores) {
    auto it = out.scores.find(node);
    if (it == out.scores.end() || score > it->second) out.scores[node] = score;
  }
  for (const auto& [node, score] : g2.scores) {
    auto ent = s2.entity_by_id(node);
    if (!ent) continue;
    auto id = s1.entity_id_by_key(ent->key);
    if (!id) continue;
    auto it = out.scores.find(*id);
    if (it == out.scores.end() || score > it->second) out.scores[*id] = score;
  }
  // Keep scores only for nodes present in the result.
  for (auto it = out.scores.begin(); it != out.scores.end();) {
    if (!out.nodes.count(it->first))
      it = out.scores.erase(it);
    else
      ++it;
  }
  return out;
}

ProvGraph graph_intersect(const ProvGraph& g1, const EventStore& s1, const ProvGraph& g2,
                          const EventStore& s2) {
  std::map<Signature, double> right_best_weight;
  std::map<Signature, bool> right_has;
  for (const auto& e : g2.edges) {
    auto sig = edge_signature(e, s2);
    right_has[sig] = true;
    if (e.weight) {
      auto it = right_best_weight.find(sig);
      if (it == right_best_weight.end() || *e.weight > it->second)
        right_best_weight[sig] = *e.weight;
    }
  }

  ProvGraph out;
  out.truncated = g1.truncated || g2.truncated;
  for (const auto& e : g1.edges) {
    auto sig = edge_signature(e, s1);
    if (!right_has.count(sig)) continue;
    GraphEdge kept = e;
    auto rw = right_best_weight.find(sig);
    if (rw != right_best_weight.end() && (!kept.weight || rw->second > *kept.weight))
      kept.weight = rw->second;
    out.add_edge(std::move(kept));
  }
  for (const auto& [node, score] : g1.scores)
    if (out.nodes.count(node)) out.scores[node] = score;
  return out;
}

// --- exports ---------------------------------------------------------------------

namespace {

struct OrderedEdge {
  Signature sig;
  const GraphEdge* edge;
};

std::vector<OrderedEdge> ordered_edges(const ProvGraph& g, const EventStore& store) {
  std::vector<OrderedEdge> v;
  v.reserve(g.edges.size());
  for (const auto& e : g.edges) v.push_back({edge_signature(e, store), &e});
  std::sort(v.begin(), v.end(), [](const OrderedEdge& a, const OrderedEdge& b) {
    if (!(a.sig == b.sig)) return a.sig < b.sig;
    return a.edge->starttime < b.edge->starttime;
  });
  return v;
}

std::vector<Entity> ordered_nodes(const ProvGraph& g, const EventStore& store) {
  std::vector<Entity> v;
  for (EntityId id : g.nodes) {
    auto e = store.entity_by_id(id);
    if (!e) throw std::runtime_error("node missing from store");
    v.push_back(std::move(*e));
  }
  std::sort(v.begin(), v.end(), [](const Entity& a, const Entity& b) { return a.key < b.key; });
  return v;
}

std::string dot_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  return out;
}

}  // namespace

std::string export_dot(const ProvGraph& g, const EventStore& store) {
  std::ostringstream os;
  os << "digraph provenance {\n";
  auto nodes = ordered_nodes(g, store);
  for (const auto& n : nodes) {
    os << "  n" << n.id << " [label=\"" << dot_escape(std::string(to_string(n.key.kind)) + ":" +
                                                      n.key.display_name())
       << "\"";
    auto rel = g.scores.find(n.id);
    if (rel != g.scores.end()) os << " rel=\"" << rel->second << "\"";
    os << "];\n";
  }
  for (const auto& oe : ordered_edges(g, store)) {
    const GraphEdge& e = *oe.edge;
    os << "  n" << e.src << " -> n" << e.dst << " [label=\"" << to_string(e.optype) << " ["
       << e.starttime << "," << e.endtime << "]";
    if (e.weight) os << " w=" << *e.weight;
    os << "\"];\n";
  }
  os << "}\n";
  return os.str();
}

std::string export_json(const ProvGraph& g, const EventStore& store) {
  nlohmann::json j;
  j["nodes"] = nlohmann::json::array();
  for (const auto& n : ordered_nodes(g, store)) {
    nlohmann::json nj;
    nj["key"] = entity_key_to_json(n.key);
    nj["attrs"] = n.attrs;
    auto rel = g.scores.find(n.id);
    if (rel != g.scores.end()) nj["rel"] = rel->second;
    j["nodes"].push_back(std::move(nj));
  }
  j["edges"] = nlohmann::json::array();
  for (const auto& oe : ordered_edges(g, store)) {
    const GraphEdge& e = *oe.edge;
    nlohmann::json ej;
    ej["sig"] = {{"src", entity_key_to_json(oe.sig.src)},
                 {"dst", entity_key_to_json(oe.sig.dst)},
                 {"op", to_string(oe.sig.optype)}};
    ej["start"] = e.starttime;
    ej["end"] = e.endtime;
    ej["amount"] = e.amount;
    ej["raw_count"] = e.raw_count;
    if (e.weight) ej["weight"] = *e.weight;
    auto ids = sorted_ids(e);
    ej["raw_ids"] = ids;
    j["edges"].push_back(std::move(ej));
  }
  if (g.truncated) j["truncated"] = true;
  return j.dump(2);
}

std::string export_csv(const ProvGraph& g, const EventStore& store) {
  std::ostringstream os;
  os << "src_host,src_kind,src_name,dst_host,dst_kind,dst_name,optype,starttime,endtime,amount,"
        "raw_count,weight\n";
  auto csv_field = [](const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
      if (c == '"') out += '"';
      out.push_back(c);
    }
    out += '"';
    return out;
  };
  for (const auto& oe : ordered_edges(g, store)) {
    const GraphEdge& e = *oe.edge;
    os << csv_field(oe.sig.src.host_id) << ',' << to_string(oe.sig.src.kind) << ','
       << csv_field(oe.sig.src.display_name()) << ',' << csv_field(oe.sig.dst.host_id) << ','
       << to_string(oe.sig.dst.kind) << ',' << csv_field(oe.sig.dst.display_name()) << ','
       << to_string(e.optype) << ',' << e.starttime << ',' << e.endtime << ',' << e.amount << ','
       << e.raw_count << ',';
    if (e.weight) os << *e.weight;
    os << '\n';
  }
  return os.str();
}

std::string export_graph(const ProvGraph& g, const EventStore& store, const std::string& format) {
  if (format == "dot") return export_dot(g, store);
  if (format == "json") return export_json(g, store);
  if (format == "csv") return export_csv(g, store);
  throw std::runtime_error("unknown export format: " + format);
}

ProvGraph import_graph_json(const std::string& text, const EventStore& store) {
  ProvGraph g;
  auto j = nlohmann::json::parse(text);
  for (const auto& nj : j.at("nodes")) {
    auto key = entity_key_from_json(nj.at("key"));
    auto id = store.entity_id_by_key(key);
    if (!id) throw std::runtime_error("node missing from store: " + key.canonical());
    g.nodes.insert(*id);
    if (nj.contains("rel")) g.scores[*id] = nj["rel"].get<double>();
  }
  for (const auto& ej : j.at("edges")) {
    GraphEdge e;
    auto src_key = entity_key_from_json(ej.at("sig").at("src"));
    auto dst_key = entity_key_from_json(ej.at("sig").at("dst"));
    auto op = optype_from_string(ej.at("sig").at("op").get<std::string>());
    if (!op) throw std::runtime_error("unknown optype in graph JSON");
    auto src = store.entity_id_by_key(src_key);
    auto dst = store.entity_id_by_key(dst_key);
    if (!src || !dst) throw std::runtime_error("edge endpoint missing from store");
    e.src = *src;
    e.dst = *dst;
    e.optype = *op;
    e.starttime = ej.at("start").get<TimestampNs>();
    e.endtime = ej.at("end").get<TimestampNs>();
    e.amount = ej.at("amount").get<std::uint64_t>();
    e.raw_count = ej.at("raw_count").get<std::uint64_t>();
    if (ej.contains("weight")) e.weight = ej["weight"].get<double>();
    if (ej.contains("raw_ids")) e.raw_ids = ej["raw_ids"].get<std::vector<EventId>>();
    if (e.raw_ids.empty()) e.raw_ids = {0};
    g.add_edge(std::move(e));
  }
  if (j.value("truncated", false)) g.truncated = true;
  return g;
}

}  // namespace provql
