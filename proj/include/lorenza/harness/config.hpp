#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lorenza/adazo.hpp"
#include "lorenza/baselines.hpp"
#include "lorenza/lorenza.hpp"
#include "lorenza/objective.hpp"
#include "lorenza/rng.hpp"

namespace lorenza::harness {

using Json = nlohmann::ordered_json;

enum class OptimizerKind { Adam, AdamW, Sam, AdaSam, AdazoSam, Lorenza, LowRankAdam };

std::string to_string(OptimizerKind kind);
OptimizerKind parse_optimizer_kind(const std::string& name);

struct LrSchedule {
  bool cosine = false;
  double lr_max = 1e-3;
  double lr_min = 0.0;

  double at(std::int64_t step, std::int64_t total) const;
};

// Everything needed to build and drive one optimizer. Only the config
// matching `kind` is meaningful.
struct OptimizerSpec {
  OptimizerKind kind = OptimizerKind::Adam;
  LrSchedule lr;
  AdamConfig adam;
  SamConfig sam;
  AdazoConfig adazo;
  LorenzaConfig lorenza;
};

OptimizerSpec parse_optimizer_spec(const Json& j);

struct InitSpec {
  enum class Kind { Gaussian, Uniform, Constant };
  Kind kind = Kind::Gaussian;
  double scale = 0.1;
  double low = -1.0;
  double high = 1.0;
  double value = 0.0;
};

InitSpec parse_init_spec(const Json& j);

struct RunConfig {
  Json objective;
  InitSpec init;
  OptimizerSpec optimizer;
  Json optimizer_json;
  std::int64_t total_steps = 1;
  // 0 means the full dataset every step (ignored by deterministic objectives).
  std::size_t batch_size = 0;
  std::uint64_t seed = 0;
  // Trial seeds; empty means the single trial `seed`.
  std::vector<std::uint64_t> grid;
  std::filesystem::path output_dir = "runs";
  std::string run_name = "run";
  std::int64_t log_every = 1;
  std::optional<double> epsilon;
  std::vector<std::int64_t> checkpoint_at;
  bool log_wall_time = false;
  Json raw;

  std::vector<std::uint64_t> trial_seeds() const;
};

// Validates and fills defaults. Throws ConfigError with the offending key.
RunConfig parse_run_config(const Json& j);

// Reads a JSON config file and applies the LORENZA_OUTPUT_DIR override.
RunConfig load_run_config(const std::filesystem::path& path);

// FNV-1a over the canonical dump of the fields that determine a trajectory
// (objective, init, optimizer, total_steps, batch_size, epsilon).
std::uint64_t config_hash(const RunConfig& cfg);

std::shared_ptr<Objective> make_objective(const Json& spec);

// Parameters with the objective's layout, filled per `init`.
ParamSet initial_params(const Objective& objective, const InitSpec& init, RngStream& rng);

// Batch for one step: uniform with replacement; full dataset if batch_size = 0.
Batch sample_batch(const Objective& objective, std::size_t batch_size, RngStream rng);

// Every sample index once, for metrics.
Batch full_batch(const Objective& objective);

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xCBF29CE484222325ull);

}  // namespace lorenza::harness
