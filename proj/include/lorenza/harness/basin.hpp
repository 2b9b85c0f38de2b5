#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "lorenza/harness/config.hpp"

namespace lorenza::harness {

enum class Basin { Sharp, Flat, Neither };

std::string to_string(Basin b);

// A point is in a basin when it lies strictly within one width of its center.
Basin classify_basin(double x, const DoubleWellSpec& spec);

// Throws UnsupportedError unless spec names the double-well objective.
DoubleWellSpec double_well_spec_from_json(const Json& spec);

struct BasinCounts {
  std::size_t sharp = 0;
  std::size_t flat = 0;
  std::size_t neither = 0;
  std::size_t total() const noexcept { return sharp + flat + neither; }
};

struct TerminalPoint {
  std::string optimizer;
  std::uint64_t seed = 0;
  double x = 0.0;
};

// Per-optimizer basin counts, keyed by optimizer name.
std::map<std::string, BasinCounts> basin_statistics(const std::vector<TerminalPoint>& points,
                                                    const DoubleWellSpec& spec);

struct BasinReport {
  DoubleWellSpec spec;
  std::map<std::string, BasinCounts> counts;
};

// Reads terminated metrics files (their summary lines) and tabulates them.
// All files must come from double-well runs with one landscape.
BasinReport basin_statistics_from_files(const std::vector<std::filesystem::path>& files);

// Comparison table: optimizer,sharp,flat,neither,total
std::string format_basin_table(const BasinReport& report);

// Expands a simple '*'/'?' pattern in the last path component.
std::vector<std::filesystem::path> expand_glob(const std::string& pattern);

}  // namespace lorenza::harness
