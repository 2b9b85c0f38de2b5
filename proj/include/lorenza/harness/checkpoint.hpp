#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "lorenza/harness/driver.hpp"

namespace lorenza::harness {

// Full trial state at a step boundary.
struct TrialSnapshot {
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
  std::int64_t step = 0;
  std::uint64_t value_calls = 0;
  std::uint64_t gradient_calls = 0;
  std::uint64_t refreshes = 0;
  // Metrics lines emitted so far, replayed verbatim on resume.
  std::string metrics;
  ParamSet params;
  RngStream optimizer_rng;
  OptimizerState optimizer;
};

// Binary layout (all integers and doubles little-endian):
//   "LRNZ1" | u32 version | u64 config hash | payload | u64 FNV-1a of everything before it
std::string encode_checkpoint(const TrialSnapshot& snap);

// Throws CheckpointError on bad magic, version, checksum, truncation, or
// (when given) a config hash that differs from `expected_hash`.
TrialSnapshot decode_checkpoint(std::string_view bytes,
                                std::optional<std::uint64_t> expected_hash = std::nullopt);

void checkpoint_save(const std::filesystem::path& path, const TrialSnapshot& snap);
TrialSnapshot checkpoint_load(const std::filesystem::path& path,
                              std::optional<std::uint64_t> expected_hash = std::nullopt);

}  // namespace lorenza::harness
