#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "gazeworld/train.hpp"

namespace gazeworld {

inline constexpr const char* kVersion = "0.1.0";

// Self-describing report: command, version, wall clock, the fully resolved
// config, and command-specific results. Metric values are reproducible from
// the embedded config; wall_seconds is informational.
nlohmann::json make_report(const std::string& command, const nlohmann::json& resolved_config,
                           double wall_seconds, nlohmann::json results);

void write_json(const nlohmann::json& doc, const std::filesystem::path& path);

// Minimal JSON-Schema checker covering the subset the shipped schema uses:
// type, properties, required, additionalProperties, items, enum, oneOf.
// Returns human-readable problems; empty means the value validates.
std::vector<std::string> validate_against_schema(const nlohmann::json& value,
                                                 const nlohmann::json& schema);

// Hand-rolled SVG polyline plot of the loss trajectories; byte-deterministic
// for identical reports.
std::string loss_curve_svg(const TrainReport& report);

}  // namespace gazeworld
