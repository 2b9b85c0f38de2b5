#include "lorenza/baselines.hpp"

#include "lorenza/errors.hpp"
#include "lorenza/rge.hpp"

namespace lorenza {

void AdamConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("adam: lr must be > 0");
  if (!(weight_decay >= 0.0)) throw ConfigError("adam: weight decay must be >= 0");
  validate_moments(moments);
}

AdamState adam_init(const ParamSet& params) {
  return AdamState{params.zeros_like<GradTag>(), params.zeros_like<GradTag>(), 0};
}

namespace {

// Shared Adam outer update; commits only when the result is finite.
void apply_adam(AdamState& state, ParamSet& params, const GradSet& g, double lr,
                const MomentConfig& moments, double weight_decay) {
  AdamState next = state;
  ParamSet updated = params;
  for (std::size_t l = 0; l < params.size(); ++l) {
    const Matrix dir =
        adam_direction(next.m[l].value, next.v[l].value, g[l].value, moments, state.t);
    updated[l].value.add_scaled(dir, -lr);
    if (weight_decay > 0.0) updated[l].value.add_scaled(params[l].value, -lr * weight_decay);
  }
  if (!all_finite(updated)) throw NumericalError("adam: non-finite update");
  next.t = state.t + 1;
  state = std::move(next);
  params = std::move(updated);
}

}  // namespace

StepReport adam_step(AdamState& state, ParamSet& params, Objective& oracle, const Batch& batch,
                     const AdamConfig& cfg) {
  require_congruent(params, state.m, "adam_step");
  const GradSet g = oracle.gradient(params, batch);
  if (!all_finite(g)) throw NumericalError("adam_step: non-finite gradient");
  apply_adam(state, params, g, cfg.lr, cfg.moments, cfg.weight_decay);
  return {};
}

void SamConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("sam: lr must be > 0");
  validate_rho(rho);
  if (adaptive) validate_moments(moments);
}

SamState sam_init(const ParamSet& params) { return adam_init(params); }

StepReport sam_step(SamState& state, ParamSet& params, Objective& oracle, const Batch& batch,
                    const SamConfig& cfg) {
  require_congruent(params, state.m, "sam_step");
  StepReport report;
  report.rho = resolve_rho(cfg.rho, cfg.lr);

  const GradSet g = oracle.gradient(params, batch);
  if (!all_finite(g)) throw NumericalError("sam_step: non-finite gradient");
  report.perturbation_norm = joint_norm(g);

  ParamSet probe_point;
  try {
    probe_point = ascent_perturb(params, g, report.rho);
  } catch (const DegeneratePerturbationError&) {
    report.degenerate_perturbation = true;
    report.rho = 0.0;
    probe_point = params;
  }
  const GradSet g_sam = oracle.gradient(probe_point, batch);
  if (!all_finite(g_sam)) throw NumericalError("sam_step: non-finite SAM gradient");

  if (cfg.adaptive) {
    apply_adam(state, params, g_sam, cfg.lr, cfg.moments, 0.0);
  } else {
    ParamSet updated = add_scaled(params, g_sam, -cfg.lr);
    if (!all_finite(updated)) throw NumericalError("sam_step: non-finite update");
    params = std::move(updated);
    state.t += 1;
  }
  return report;
}

}  // namespace lorenza
