#pragma once

#include <json.hpp>
#include <optional>
#include <string>

#include "dechist/scenarios.hpp"

namespace dechist {

using Json = nlohmann::ordered_json;

Json load_json_file(const std::string& path);

// FNV-1a over the canonical serialized form.
std::string config_hash(const Json& config);

struct CliOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
};

// Strict parsers: unknown fields are errors, defaults are echoed back into the
// report metadata as "config_echo".
ScenarioConfig parse_scenario_config(const Json& config, const std::string& id,
                                     const CliOverrides& overrides = {});
Json scenario_config_echo(const ScenarioConfig& config);

// Generic tool runs; each returns a report ready for write_outputs.
ScenarioReport run_evolve_command(const Json& config, const CliOverrides& overrides = {});
ScenarioReport run_master_command(const Json& config, const CliOverrides& overrides = {});
ScenarioReport run_histories_command(const Json& config, const CliOverrides& overrides = {});
ScenarioReport run_classical_command(const Json& config, const CliOverrides& overrides = {});

// Parameter sweep over one scenario config field (JSON pointer), merged
// deterministically in value order.
ScenarioReport run_sweep_command(const Json& config, const CliOverrides& overrides = {});

struct OutputOptions {
  std::string dir = ".";
  std::string snapshot_format = "binary";  // "binary" or "csv"
  bool strict = false;                     // promote warnings to errors
};

struct RunManifest {
  std::string config_hash;
  std::string version;
  std::string timestamp;
  std::vector<std::string> outputs;
  std::vector<std::pair<std::string, bool>> checks;
  bool ok = true;
};

// Writes report.json, one CSV per curve, snapshots, then manifest.json, and
// verifies every listed file exists and is non-empty.
RunManifest write_outputs(const ScenarioReport& report, const OutputOptions& options);

// Density-matrix snapshot files. Binary layout: 32-byte header (magic
// "DHQC1\0", two zero pad bytes, uint64 n, double dx, double x_min), then
// n*n row-major complex entries as little-endian float64 (re, im) pairs.
void write_snapshot_binary(const std::string& path, const SpatialGrid& grid, const CMatrix& m);
struct SnapshotData {
  std::uint64_t n = 0;
  double dx = 0.0;
  double x_min = 0.0;
  CMatrix matrix;
};
SnapshotData read_snapshot_binary(const std::string& path);
void write_snapshot_csv(const std::string& path, const SpatialGrid& grid, const CMatrix& m);

void write_curve_csv(const std::string& path, const Curve& curve);

}  // namespace dechist
