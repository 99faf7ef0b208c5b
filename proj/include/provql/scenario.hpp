#pragma once

// Synthetic two-host attack scenarios with planted ground truth. Each
// scenario emits a JSONL audit log embedding a critical-edge chain (the
// attack) inside Poisson background noise (benign workers reading libraries
// and writing temp files), plus a manifest naming the critical event ids,
// the planted entry nodes and the matching investigation queries.

#include <cstdint>
#include <string>
#include <vector>

namespace provql {

struct ScenarioOutput {
  std::string jsonl;         // the audit log
  std::string manifest_json;
  std::string query;         // two-sub-query investigation program
  std::string weight_query;  // backward-only variant filtering on weight >= 0.5
};

// scenario: password_crack | data_leakage | vpn_filter
// scale: approximate number of background (noise) events
ScenarioOutput generate_scenario(const std::string& scenario, std::uint64_t scale,
                                 std::uint64_t seed);

std::vector<std::string> scenario_names();

}  // namespace provql
