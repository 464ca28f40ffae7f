#pragma once

// Scenario files (JSON), run outputs (CSV trajectory + JSON metrics).
//
// Scenario layout:
//   {
//     "name": "...",
//     "topology":    {"nodes": N, "directed": bool, "edges": [[tail, head], ...]},   // 1-based
//     "performance": {"family", "delta_lo", "delta_hi", "beta0", "betaf", "lambda",
//                     "overrides": [{"edge"?, "axis"?, <fields>?}, ...]},            // 1-based
//     "gains":       {"c": [c1, c2], "gamma": [..N..], "vartheta"?, "epsilon"},
//     "plant":       {"order", "dims", "friction": {"model", "k1", "k2"}, "theta": [[..d..] x N],
//                     "initial": {"positions": [...], "velocities": [...]},
//                     "formation": {"positions": [...]} | {"offsets": [...]} |
//                                  {"regular_polygon": N}},
//     "sim":         {"dt", "horizon", "seed", "log_stride", "settle_tol"}
//   }

#include <iosfwd>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "edgeform/simulation.hpp"

namespace edgeform {

/// Malformed or invalid scenario; the message names the field at fault.
class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Unknown keys are rejected. Throws ScenarioError.
ScenarioConfig scenario_from_json(const nlohmann::json& doc);
nlohmann::json scenario_to_json(const ScenarioConfig& config);

/// The `topology` section on its own: {"nodes", "directed", "edges"}.
Topology topology_from_json(const nlohmann::json& obj);

/// Reads, applies `key=value` overrides (dotted paths into the document,
/// array indices zero-based, values parsed as JSON) and validates.
ScenarioConfig parse_scenario(const std::string& path, const std::vector<std::string>& overrides = {});
nlohmann::json load_json_file(const std::string& path);

/// Replaces an existing value; throws ScenarioError for unknown paths.
void apply_override(nlohmann::json& doc, const std::string& assignment);

/// Header plus one line per sample, values printed with 9 significant digits.
void write_csv(const TrajectoryLog& log, std::ostream& out);

nlohmann::json metrics_to_json(const ScenarioConfig& config, const RunResult& result);

}  // namespace edgeform
