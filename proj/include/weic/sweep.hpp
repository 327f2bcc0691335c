#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "weic/beamforming.hpp"
#include "weic/scenario.hpp"

namespace weic {

enum class SweepKind { snr, users, load, cluster };
SweepKind sweep_kind_from_string(const std::string& name);
std::string to_string(SweepKind kind);

struct SweepConfig {
  SweepKind kind = SweepKind::snr;
  SystemConfig base;                 // N is raised to K whenever K grows past it
  double files_per_user = 2.0;       // r, fixed except in load sweeps
  int trials = 30;
  std::uint64_t seed = 1;
  std::vector<double> points;        // empty: the kind's default grid
  std::vector<std::string> methods{"exhaustive", "sequential"};
  int cluster_size = 5;
  bool per_round_refresh = false;
  int workers = 0;                   // 0: one per hardware thread
  int max_attempts = 1000;           // redraws of an instance with no feasible code
  SolverParams params;

  std::vector<double> grid() const;
  void validate() const;
};

/// Default grids: SNR in dB {0, 5, 10, 15, 20}; K {4, 5, 6, 10, 20, 30};
/// r {1, 2, 3, 4}; cluster K {10, 20, 30}.
std::vector<double> default_grid(SweepKind kind);

SweepConfig sweep_config_from_json(const nlohmann::ordered_json& j, const SweepConfig& defaults = {});
nlohmann::ordered_json sweep_config_to_json(const SweepConfig& config);

/// One (point, trial, method) cell. status is "ok" or "guard_exceeded";
/// total_time is unset for the latter.
struct TrialRecord {
  double x = 0.0;
  std::string mode;  // direct | cluster
  std::string method;
  int trial = 0;
  std::uint64_t seed = 0;
  int attempts = 1;
  std::string status = "ok";
  std::optional<double> total_time;
  bool hit_iteration_cap = false;
};

struct SweepRow {
  double x = 0.0;
  std::string mode;
  std::string method;
  int trials = 0;  // zero marks an absent cell
  double mean = 0.0;
  double stddev = 0.0;
};

struct SweepResult {
  SweepConfig config;
  std::vector<TrialRecord> records;  // sorted by (x, mode, method, trial)
  std::vector<SweepRow> rows;
};

SweepResult run_sweep(const SweepConfig& config);

/// "kind,x,mode,method,trials,mean_T,std_T"; absent cells leave the stats empty.
std::string summary_csv(const SweepResult& result);
std::string trials_csv(const SweepResult& result);
nlohmann::ordered_json sweep_manifest(const SweepResult& result);

/// FNV-1a over the canonical config JSON, as 16 hex digits.
std::string config_hash(const SweepConfig& config);

/// Writes <prefix>.csv, <prefix>_trials.csv and <prefix>_manifest.json.
void write_sweep(const SweepResult& result, const std::filesystem::path& out_dir, const std::string& prefix);

/// "weic <version>" plus the git description baked in at build time.
std::string provenance();

}  // namespace weic
