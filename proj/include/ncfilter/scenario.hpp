#pragma once

// Scenario configuration, the built-in presets, and the runs behind the CLI.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ncfilter/trajectory.hpp"

namespace ncfilter {

enum class Measurement { none, counting, homodyne };

struct ScenarioConfig {
  std::string name = "scenario";

  /// "two-level-decay" or empty for explicit operators
  std::string system_preset;
  double kappa = 1.0;
  SystemModel model;

  /// "ground", "excited" or "matrix"
  std::string rho0_kind = "ground";
  Operator rho0;

  std::optional<FieldState> field;
  Measurement measurement = Measurement::none;

  double dt = 1e-3;
  double T = 0.0;  // resolved horizon, always > 0 after parsing

  int M = 2000;
  std::uint64_t master_seed = 1;

  std::string out_path = "out";
  std::string format = "csv";  // csv | json

  /// Test knob: scales L in the reduced equations only, so the oracle
  /// comparison must fail when it differs from 1.
  double reduced_coupling_scale = 1.0;

  TimeGrid grid() const { return TimeGrid::make(dt, T); }
  const FieldState& field_state() const;
};

/// Parses the JSON (comments allowed) scenario schema documented in README.
/// Errors carry the field path; unknown keys are listed.
ScenarioConfig parse_config(const std::string& text);
/// Canonical JSON text of a config (parse_config(to_json(c)) == c).
std::string to_json(const ScenarioConfig& cfg);
bool operator==(const ScenarioConfig& a, const ScenarioConfig& b);

/// FNV-1a 64 of the canonical JSON without the output section.
std::uint64_t config_hash(const ScenarioConfig& cfg);
std::string hash_hex(std::uint64_t h);

std::vector<std::string> preset_names();
/// fig1-ground, fig1-excited, fig2-ground, fig2-excited
ScenarioConfig preset(const std::string& name);
/// Preset name or path to a config file.
ScenarioConfig load_config(const std::string& preset_or_path);

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> data;  // one vector per column
  /// counting ensembles: histogram of total counts
  std::vector<double> count_distribution;
  std::vector<std::string> warnings;

  std::size_t rows() const { return data.empty() ? 0 : data[0].size(); }
  const std::vector<double>& column(const std::string& name) const;
};

/// Deterministic run: t, flux, P_exc (+ P_atleast_one_count when a
/// measurement is configured).
Table run_scenario(const ScenarioConfig& cfg);

/// Ensemble run: the deterministic columns plus mean / stderr columns.
Table run_trajectories(const ScenarioConfig& cfg, int threads = 0);

struct OracleCheck {
  std::string name;
  double deviation = 0.0;
  double tolerance = 0.0;
  bool passed() const { return deviation <= tolerance; }
};

struct OracleReport {
  std::vector<OracleCheck> checks;
  std::vector<std::string> notes;

  bool passed() const;
  std::string text() const;
};

/// Differential comparison of the reduced equations against the extended
/// system for the config's model and field.
OracleReport compare_oracle(const ScenarioConfig& cfg, int seeds = 3,
                            int threads = 0);

/// Writes <out>/<name>.csv|json and <out>/<name>.meta.json; returns the data
/// file path.
std::string write_outputs(const ScenarioConfig& cfg, const Table& table);

std::string tool_version();

}  // namespace ncfilter
