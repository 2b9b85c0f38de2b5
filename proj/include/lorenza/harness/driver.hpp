#pragma once

#include <variant>

#include "lorenza/harness/config.hpp"

namespace lorenza::harness {

// SAM/AdaSAM share AdamState.
using OptimizerState = std::variant<AdamState, AdazoState, LorenzaState>;

// Builds the optimizer state. LORENZA-family optimizers spend one gradient
// call here (the step-0 subspace).
OptimizerState init_optimizer(const OptimizerSpec& spec, const ParamSet& params,
                              Objective& oracle, const Batch& first_batch, const RngStream& rng);

// Dispatches one step at learning rate `lr`.
StepReport step_optimizer(const OptimizerSpec& spec, OptimizerState& state, ParamSet& params,
                          Objective& oracle, const Batch& batch, double lr, RngStream& rng);

}  // namespace lorenza::harness
