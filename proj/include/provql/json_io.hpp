#pragma once

// JSON (de)serialization helpers shared by the importer, the file-backed
// store and the exporters. The entity schema matches the JSONL log format:
//   file:    {"kind":"file","host":"1","path":"/tmp/x"}
//   process: {"kind":"process","host":"1","pid":42,"name":"bash"}
//   network: {"kind":"network","host":"2","src_ip":"a","src_port":1,
//             "dst_ip":"b","dst_port":2}

#include <json.hpp>

#include "provql/model.hpp"

namespace provql {

nlohmann::json entity_key_to_json(const EntityKey& key);

// Throws std::runtime_error with a reason on a malformed object.
EntityKey entity_key_from_json(const nlohmann::json& j);

nlohmann::json entity_to_json(const Entity& e);
Entity entity_from_json(const nlohmann::json& j);

}  // namespace provql
