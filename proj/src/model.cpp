#include "provql/model.hpp"

#include <algorithm>
#include <functional>
#include <sstream>
#include <tuple>

namespace provql {

const char* to_string(EntityKind k) {
  switch (k) {
    case EntityKind::File: return "file";
    case EntityKind::Process: return "process";
    case EntityKind::Network: return "network";
  }
  return "?";
}

const char* to_string(OpType t) {
  switch (t) {
    case OpType::Read: return "read";
    case OpType::Write: return "write";
    case OpType::Rename: return "rename";
    case OpType::CreateObject: return "create_object";
    case OpType::Execute: return "execute";
    case OpType::Clone: return "clone";
    case OpType::Recvmsg: return "recvmsg";
    case OpType::Sendmsg: return "sendmsg";
  }
  return "?";
}

std::optional<EntityKind> entity_kind_from_string(const std::string& s) {
  if (s == "file") return EntityKind::File;
  if (s == "process") return EntityKind::Process;
  if (s == "network") return EntityKind::Network;
  return std::nullopt;
}

std::optional<OpType> optype_from_string(const std::string& s) {
  for (int i = 0; i < kOpTypeCount; ++i) {
    auto t = static_cast<OpType>(i);
    if (s == to_string(t)) return t;
  }
  return std::nullopt;
}

EntityKey EntityKey::file(std::string host, std::string path) {
  EntityKey k;
  k.host_id = std::move(host);
  k.kind = EntityKind::File;
  k.path = std::move(path);
  return k;
}

EntityKey EntityKey::process(std::string host, std::uint64_t pid, std::string name) {
  EntityKey k;
  k.host_id = std::move(host);
  k.kind = EntityKind::Process;
  k.pid = pid;
  k.name = std::move(name);
  return k;
}

EntityKey EntityKey::network(std::string host, std::string src_ip, std::uint32_t src_port,
                             std::string dst_ip, std::uint32_t dst_port) {
  EntityKey k;
  k.host_id = std::move(host);
  k.kind = EntityKind::Network;
  k.src_ip = std::move(src_ip);
  k.src_port = src_port;
  k.dst_ip = std::move(dst_ip);
  k.dst_port = dst_port;
  return k;
}

static auto key_tuple(const EntityKey& k) {
  return std::tie(k.host_id, k.kind, k.path, k.name, k.pid, k.src_ip, k.src_port, k.dst_ip,
                  k.dst_port);
}

bool EntityKey::operator==(const EntityKey& o) const { return key_tuple(*this) == key_tuple(o); }
bool EntityKey::operator<(const EntityKey& o) const { return key_tuple(*this) < key_tuple(o); }

std::string EntityKey::display_name() const {
  switch (kind) {
    case EntityKind::File: return path;
    case EntityKind::Process: return std::to_string(pid) + ":" + name;
    case EntityKind::Network: {
      std::ostringstream os;
      os << src_ip << ":" << src_port << ">" << dst_ip << ":" << dst_port;
      return os.str();
    }
  }
  return {};
}

std::string EntityKey::canonical() const {
  std::ostringstream os;
  os << to_string(kind) << "|" << host_id << "|" << display_name();
  return os.str();
}

std::vector<std::string> EntityKey::validate() const {
  std::vector<std::string> v;
  switch (kind) {
    case EntityKind::File:
      if (path.empty()) v.push_back("file key missing path");
      break;
    case EntityKind::Process:
      if (name.empty()) v.push_back("process key missing name");
      break;
    case EntityKind::Network:
      if (src_ip.empty() || dst_ip.empty()) v.push_back("network key missing ip");
      break;
  }
  return v;
}

std::size_t EntityKeyHash::operator()(const EntityKey& k) const {
  return std::hash<std::string>{}(k.canonical());
}

std::vector<std::string> validate_event(const Event& e,
                                        const std::unordered_set<EntityId>& known_entities) {
  std::vector<std::string> violations;
  if (e.starttime > e.endtime) violations.push_back("time order");
  if (e.src == e.dst) violations.push_back("self loop");
  if (!known_entities.count(e.src)) violations.push_back("unknown src entity");
  if (!known_entities.count(e.dst)) violations.push_back("unknown dst entity");
  return violations;
}

GraphEdge GraphEdge::from_event(const Event& e) {
  GraphEdge g;
  g.src = e.src;
  g.dst = e.dst;
  g.optype = e.optype;
  g.starttime = e.starttime;
  g.endtime = e.endtime;
  g.amount = e.amount;
  g.raw_count = 1;
  g.raw_ids = {e.id};
  return g;
}

void ProvGraph::add_edge(GraphEdge e) {
  nodes.insert(e.src);
  nodes.insert(e.dst);
  edges.push_back(std::move(e));
}

std::vector<std::size_t> ProvGraph::out_edges(EntityId u) const {
  std::vector<std::size_t> r;
  for (std::size_t i = 0; i < edges.size(); ++i)
    if (edges[i].src == u) r.push_back(i);
  return r;
}

std::vector<std::size_t> ProvGraph::in_edges(EntityId v) const {
  std::vector<std::size_t> r;
  for (std::size_t i = 0; i < edges.size(); ++i)
    if (edges[i].dst == v) r.push_back(i);
  return r;
}

std::unordered_set<EventId> ProvGraph::raw_id_set() const {
  std::unordered_set<EventId> s;
  for (const auto& e : edges) s.insert(e.raw_ids.begin(), e.raw_ids.end());
  return s;
}

GraphAdjacency::GraphAdjacency(const ProvGraph& g) {
  for (std::size_t i = 0; i < g.edges.size(); ++i) {
    out_[g.edges[i].src].push_back(i);
    in_[g.edges[i].dst].push_back(i);
  }
}

const std::vector<std::size_t>& GraphAdjacency::out(EntityId u) const {
  auto it = out_.find(u);
  return it == out_.end() ? empty_ : it->second;
}

const std::vector<std::size_t>& GraphAdjacency::in(EntityId v) const {
  auto it = in_.find(v);
  return it == in_.end() ? empty_ : it->second;
}

}  // namespace provql
