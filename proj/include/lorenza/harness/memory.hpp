#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lorenza/harness/config.hpp"

namespace lorenza::harness {

// Element counts for one layer. m <= n are the layer's smaller and larger dims.
struct LayerMemory {
  std::string name;
  std::size_t m = 0;
  std::size_t n = 0;
  std::uint64_t weights = 0;
  std::uint64_t state_actual = 0;
  std::optional<std::uint64_t> state_model;  // absent when the comparison table has no entry
};

struct MemoryReport {
  std::string optimizer;
  std::size_t rank = 0;  // 0 for full-rank optimizers
  std::vector<LayerMemory> layers;
  std::uint64_t weights = 0;
  std::uint64_t state_actual = 0;
  std::optional<std::uint64_t> state_model;
  std::string formula_actual;
  std::string formula_model;

  Json to_json() const;
  std::string to_text() const;
};

// Actual counts are the elements held in this implementation's optimizer
// state between steps. Throws ConfigError when the rank exceeds a layer's
// smaller dimension.
MemoryReport memory_report(const ParamSet& params, OptimizerKind kind, std::size_t rank);
MemoryReport memory_report(const ParamSet& params, const OptimizerSpec& spec);

}  // namespace lorenza::harness
