#include "lorenza/adazo.hpp"

#include <cmath>

#include "lorenza/errors.hpp"

namespace lorenza {

void AdazoConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("adazo: lr must be > 0");
  if (!(mu > 0.0)) throw ConfigError("adazo: mu must be > 0");
  if (q < 1) throw ConfigError("adazo: q must be >= 1");
  validate_rho(rho);
  validate_moments(moments);
}

AdazoState adazo_init(const ParamSet& params) {
  return AdazoState{params.zeros_like<GradTag>(), params.zeros_like<GradTag>(), 0};
}

StepReport adazo_step(AdazoState& state, ParamSet& params, Objective& oracle, const Batch& batch,
                      const AdazoConfig& cfg, RngStream& rng) {
  require_congruent(params, state.m, "adazo_step");
  require_congruent(params, state.v, "adazo_step");

  StepReport report;
  report.rho = resolve_rho(cfg.rho, cfg.lr);

  ZoEstimate est = estimate_gradient(oracle, params, batch, cfg.mu, cfg.q, FullGaussian{}, rng);
  const GradSet pert = scaled(std::move(est.grads), sign_factor(cfg.sign));
  report.perturbation_norm = joint_norm(pert);

  ParamSet probe_point;
  try {
    probe_point = ascent_perturb(params, pert, report.rho);
  } catch (const DegeneratePerturbationError&) {
    report.degenerate_perturbation = true;
    report.rho = 0.0;
    probe_point = params;
  }

  const GradSet g_sam = oracle.gradient(probe_point, batch);
  if (!all_finite(g_sam)) throw NumericalError("adazo_step: non-finite SAM gradient");

  AdazoState next = state;
  ParamSet updated = params;
  for (std::size_t l = 0; l < params.size(); ++l) {
    const Matrix dir = adam_direction(next.m[l].value, next.v[l].value, g_sam[l].value,
                                      cfg.moments, state.t);
    updated[l].value.add_scaled(dir, -cfg.lr);
  }
  if (!all_finite(updated)) throw NumericalError("adazo_step: non-finite update");
  next.t = state.t + 1;

  state = std::move(next);
  params = std::move(updated);
  return report;
}

}  // namespace lorenza
