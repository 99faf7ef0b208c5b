#include "provql/json_io.hpp"

#include <stdexcept>

namespace provql {

using nlohmann::json;

json entity_key_to_json(const EntityKey& key) {
  json j;
  j["kind"] = to_string(key.kind);
  j["host"] = key.host_id;
  switch (key.kind) {
    case EntityKind::File:
      j["path"] = key.path;
      break;
    case EntityKind::Process:
      j["pid"] = key.pid;
      j["name"] = key.name;
      break;
    case EntityKind::Network:
      j["src_ip"] = key.src_ip;
      j["src_port"] = key.src_port;
      j["dst_ip"] = key.dst_ip;
      j["dst_port"] = key.dst_port;
      break;
  }
  return j;
}

static std::string require_string(const json& j, const char* field) {
  auto it = j.find(field);
  if (it == j.end() || !it->is_string())
    throw std::runtime_error(std::string("missing field: ") + field);
  return it->get<std::string>();
}

static std::uint64_t require_uint(const json& j, const char* field) {
  auto it = j.find(field);
  if (it == j.end() || !it->is_number_unsigned())
    throw std::runtime_error(std::string("missing field: ") + field);
  return it->get<std::uint64_t>();
}

EntityKey entity_key_from_json(const json& j) {
  if (!j.is_object()) throw std::runtime_error("entity key is not an object");
  auto kind_s = require_string(j, "kind");
  auto kind = entity_kind_from_string(kind_s);
  if (!kind) throw std::runtime_error("unknown kind: " + kind_s);
  auto host = require_string(j, "host");
  switch (*kind) {
    case EntityKind::File: return EntityKey::file(host, require_string(j, "path"));
    case EntityKind::Process:
      return EntityKey::process(host, require_uint(j, "pid"), require_string(j, "name"));
    case EntityKind::Network:
      return EntityKey::network(host, require_string(j, "src_ip"),
                                static_cast<std::uint32_t>(require_uint(j, "src_port")),
                                require_string(j, "dst_ip"),
                                static_cast<std::uint32_t>(require_uint(j, "dst_port")));
  }
  throw std::runtime_error("unreachable");
}

json entity_to_json(const Entity& e) {
  json j = entity_key_to_json(e.key);
  j["type"] = "entity";
  if (!e.attrs.empty()) j["attrs"] = e.attrs;
  return j;
}

Entity entity_from_json(const json& j) {
  Entity e;
  e.key = entity_key_from_json(j);
  if (auto it = j.find("attrs"); it != j.end() && it->is_object())
    e.attrs = it->get<std::map<std::string, std::string>>();
  return e;
}

}  // namespace provql
