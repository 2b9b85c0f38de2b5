#pragma once

#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include "lorenza/moments.hpp"
#include "lorenza/objective.hpp"
#include "lorenza/params.hpp"
#include "lorenza/rge.hpp"
#include "lorenza/rng.hpp"
#include "lorenza/schedule.hpp"
#include "lorenza/ssrf.hpp"
#include "lorenza/step.hpp"

namespace lorenza {

// Refresh the subspace whenever the global step is a multiple of `every`.
struct PeriodicRefresh {
  std::int64_t every = 200;
};

// Refresh a layer when its last projected gradient norm fell to `threshold`.
struct GradNormRefresh {
  double threshold = 0.0;
};

using RefreshPolicy = std::variant<PeriodicRefresh, GradNormRefresh>;

struct LorenzaConfig {
  // Effective learning rate (scale factor applied to the back-projected
  // update). `eta` is carried for completeness and defaults to alpha.
  double alpha = 1e-3;
  std::optional<double> eta;
  MomentConfig moments{};
  double weight_decay = 0.0;
  std::size_t rank = 4;
  RefreshPolicy refresh = PeriodicRefresh{};
  bool reset_moments_on_refresh = false;
  int power_iters = 0;
  int q = 1;
  double mu = 1e-3;
  RhoSetting rho = 0.05;
  std::optional<double> gsam_alpha;
  PerturbationSign sign = PerturbationSign::Ascent;

  double effective_eta() const noexcept { return eta.value_or(alpha); }
  void validate() const;
};

struct LorenzaLayerState {
  Subspace sub;
  Matrix m;  // r x n
  Matrix v;  // r x n
  // Updates folded into (m, v); restarts at 0 when moments are reset.
  std::int64_t t = 0;
  std::int64_t last_refresh_step = 0;
  double last_lowrank_grad_norm = 0.0;
};

struct LorenzaState {
  std::vector<LorenzaLayerState> layers;
  std::int64_t t = 0;  // global step counter
  RngStream sketch_rng;
  RngStream direction_rng;
};

// Block 1 at t = 0: one gradient call, then a subspace per layer. A layer
// whose initial gradient is zero gets a random orthonormal basis.
// The optimizer keeps its own random streams, derived from `rng`.
LorenzaState lorenza_init(const ParamSet& params, const LorenzaConfig& cfg, Objective& oracle,
                          const Batch& batch, const RngStream& rng);

struct RefreshOutcome {
  bool refreshed = false;  // a gradient was computed and at least one layer re-sketched
  bool retained = false;   // some layer kept its previous subspace (zero or deficient gradient)
};

// Recomputes the subspace of every layer whose trigger fires at state.t.
// Costs one gradient call when any layer fires, none otherwise.
RefreshOutcome maybe_refresh_subspace(LorenzaState& state, const ParamSet& params,
                                      Objective& oracle, const Batch& batch,
                                      const LorenzaConfig& cfg);

// Joint central-difference estimate along Q diag(u) R directions;
// 2q value calls. Uses state.direction_rng.
GradSet lowrank_perturbation(LorenzaState& state, const ParamSet& params, Objective& oracle,
                             const Batch& batch, const LorenzaConfig& cfg);

// grad_sam - alpha * g_perp, where g_perp is the component of
// grad_unperturbed orthogonal to grad_sam.
GradSet gsam_decompose(const GradSet& grad_unperturbed, const GradSet& grad_sam,
                       double alpha_gsam);

// One full step; current_lr is the alpha used for this step and drives a
// scheduled rho. Leaves (state, params) untouched on error.
StepReport lorenza_step(LorenzaState& state, ParamSet& params, Objective& oracle,
                        const Batch& batch, const LorenzaConfig& cfg, double current_lr);

// Low-rank Adam (no perturbation): lorenza_step with rho = 0 and GSAM off,
// minus the value calls the ZO estimate would spend.
StepReport lowrank_adam_step(LorenzaState& state, ParamSet& params, Objective& oracle,
                             const Batch& batch, const LorenzaConfig& cfg, double current_lr);

}  // namespace lorenza
