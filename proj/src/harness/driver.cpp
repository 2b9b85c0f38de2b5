#include "lorenza/harness/driver.hpp"

#include "lorenza/errors.hpp"

namespace lorenza::harness {

OptimizerState init_optimizer(const OptimizerSpec& spec, const ParamSet& params,
                              Objective& oracle, const Batch& first_batch, const RngStream& rng) {
  switch (spec.kind) {
    case OptimizerKind::Adam:
    case OptimizerKind::AdamW:
      return adam_init(params);
    case OptimizerKind::Sam:
    case OptimizerKind::AdaSam:
      return sam_init(params);
    case OptimizerKind::AdazoSam:
      return adazo_init(params);
    case OptimizerKind::Lorenza:
    case OptimizerKind::LowRankAdam:
      return lorenza_init(params, spec.lorenza, oracle, first_batch, rng);
  }
  throw UnsupportedError("init_optimizer: unknown optimizer");
}

StepReport step_optimizer(const OptimizerSpec& spec, OptimizerState& state, ParamSet& params,
                          Objective& oracle, const Batch& batch, double lr, RngStream& rng) {
  switch (spec.kind) {
    case OptimizerKind::Adam:
    case OptimizerKind::AdamW: {
      AdamConfig cfg = spec.adam;
      cfg.lr = lr;
      return adam_step(std::get<AdamState>(state), params, oracle, batch, cfg);
    }
    case OptimizerKind::Sam:
    case OptimizerKind::AdaSam: {
      SamConfig cfg = spec.sam;
      cfg.lr = lr;
      return sam_step(std::get<AdamState>(state), params, oracle, batch, cfg);
    }
    case OptimizerKind::AdazoSam: {
      AdazoConfig cfg = spec.adazo;
      cfg.lr = lr;
      return adazo_step(std::get<AdazoState>(state), params, oracle, batch, cfg, rng);
    }
    case OptimizerKind::Lorenza:
      return lorenza_step(std::get<LorenzaState>(state), params, oracle, batch, spec.lorenza, lr);
    case OptimizerKind::LowRankAdam:
      return lowrank_adam_step(std::get<LorenzaState>(state), params, oracle, batch,
                               spec.lorenza, lr);
  }
  throw UnsupportedError("step_optimizer: unknown optimizer");
}

}  // namespace lorenza::harness
