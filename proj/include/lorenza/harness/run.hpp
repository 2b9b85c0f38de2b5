#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lorenza/harness/config.hpp"

namespace lorenza::harness {

// One JSON-Lines metrics entry. lowrank_grad_norm is null for optimizers
// without a projected gradient.
struct MetricsRecord {
  std::int64_t step = 0;
  double loss = 0.0;
  double grad_norm_sq = 0.0;
  std::optional<double> lowrank_grad_norm;
  double lr = 0.0;
  double rho = 0.0;
  std::uint64_t gradient_calls_cum = 0;
  std::uint64_t value_calls_cum = 0;
  std::uint64_t refreshes_cum = 0;
  bool refresh_flag = false;
  bool degenerate_flag = false;
  double wall_ms = 0.0;

  Json to_json() const;
  static MetricsRecord from_json(const Json& j);
};

struct TrialOptions {
  std::optional<std::filesystem::path> resume;
  // Stop (without a summary line) once this many steps have completed.
  std::optional<std::int64_t> stop_after;
};

struct TrialResult {
  std::uint64_t seed = 0;
  std::filesystem::path metrics_path;
  std::string termination;  // steps_exhausted | epsilon_reached | numerical_abort | interrupted
  std::int64_t steps = 0;
  double final_loss = 0.0;
  double final_grad_norm_sq = 0.0;
  std::uint64_t gradient_calls = 0;
  std::uint64_t value_calls = 0;
  std::uint64_t refreshes = 0;
  ParamSet final_params;
};

std::filesystem::path trial_metrics_path(const RunConfig& cfg, std::uint64_t seed);
std::filesystem::path trial_checkpoint_path(const RunConfig& cfg, std::uint64_t seed,
                                            std::int64_t step);

// Runs one seeded trial, writing its metrics file (and any configured
// checkpoints). The output is a pure function of (cfg, seed).
TrialResult run_trial(const RunConfig& cfg, std::uint64_t seed, const TrialOptions& opts = {});

// Continues the trial stored in `checkpoint` (its seed is read from the file).
TrialResult resume_trial(const RunConfig& cfg, const std::filesystem::path& checkpoint,
                         const TrialOptions& opts = {});

struct ExperimentResult {
  std::vector<TrialResult> trials;  // in grid order
  std::filesystem::path summary_csv;
};

// Runs every trial seed (concurrently, LORENZA_THREADS workers) and writes
// summary.csv next to the metrics files. `opts` applies to every trial.
ExperimentResult run_experiment(const RunConfig& cfg, const TrialOptions& opts = {});

// Reads a metrics file; returns the records and the trailing summary (if any).
struct MetricsFile {
  std::vector<MetricsRecord> records;
  std::optional<Json> summary;
};
MetricsFile read_metrics_file(const std::filesystem::path& path);

}  // namespace lorenza::harness
