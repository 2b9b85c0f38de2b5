#pragma once

#include <cstdint>

#include "lorenza/moments.hpp"
#include "lorenza/objective.hpp"
#include "lorenza/params.hpp"
#include "lorenza/rge.hpp"
#include "lorenza/rng.hpp"
#include "lorenza/schedule.hpp"
#include "lorenza/step.hpp"

namespace lorenza {

// Full-space adaptive SAM whose ascent direction comes from the
// zeroth-order estimator: one gradient call plus 2q value calls per step.
struct AdazoConfig {
  double lr = 1e-3;  // gamma
  RhoSetting rho = 0.05;
  double mu = 1e-3;
  int q = 1;
  MomentConfig moments{};
  PerturbationSign sign = PerturbationSign::Ascent;

  void validate() const;
};

struct AdazoState {
  GradSet m;
  GradSet v;
  std::int64_t t = 0;
};

AdazoState adazo_init(const ParamSet& params);

// Advances (state, params) by one step. On any error the pair is left
// untouched. A vanishing estimate is not an error: the step proceeds with
// rho = 0 and the report flags it.
StepReport adazo_step(AdazoState& state, ParamSet& params, Objective& oracle, const Batch& batch,
                      const AdazoConfig& cfg, RngStream& rng);

}  // namespace lorenza
