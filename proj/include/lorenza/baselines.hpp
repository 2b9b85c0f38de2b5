#pragma once

#include <cstdint>

#include "lorenza/moments.hpp"
#include "lorenza/objective.hpp"
#include "lorenza/params.hpp"
#include "lorenza/schedule.hpp"
#include "lorenza/step.hpp"

namespace lorenza {

// Adam, or AdamW when weight_decay > 0 (decoupled decay).
struct AdamConfig {
  double lr = 1e-3;
  MomentConfig moments{};
  double weight_decay = 0.0;

  void validate() const;
};

struct AdamState {
  GradSet m;
  GradSet v;
  std::int64_t t = 0;
};

AdamState adam_init(const ParamSet& params);

// One gradient call.
StepReport adam_step(AdamState& state, ParamSet& params, Objective& oracle, const Batch& batch,
                     const AdamConfig& cfg);

// Two-backprop SAM. adaptive = false: SGD outer step; adaptive = true: Adam
// outer step (AdaSAM).
struct SamConfig {
  double lr = 1e-3;
  RhoSetting rho = 0.05;
  MomentConfig moments{};
  bool adaptive = false;

  void validate() const;
};

using SamState = AdamState;

SamState sam_init(const ParamSet& params);

// Gradient at W, then gradient at W + rho g/||g||_F; exactly two gradient
// calls. A zero first gradient degrades to an unperturbed step.
StepReport sam_step(SamState& state, ParamSet& params, Objective& oracle, const Batch& batch,
                    const SamConfig& cfg);

}  // namespace lorenza
