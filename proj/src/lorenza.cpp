#include "lorenza/lorenza.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "lorenza/errors.hpp"

namespace lorenza {

namespace {

constexpr std::uint64_t kDirectionStream = 1;
constexpr std::uint64_t kSketchStream = 2;

Subspace random_subspace(const Matrix& g, std::size_t rank, RngStream& rng, std::int64_t step) {
  Matrix q = qr_thin(sample_gaussian(rng, g.rows(), rank, 1.0)).q;
  Matrix r = matmul_tn(q, g);
  return Subspace{std::move(q), std::move(r), frobenius_norm(g), step};
}

bool refresh_due(const LorenzaLayerState& layer, std::int64_t t, const RefreshPolicy& policy) {
  if (layer.last_refresh_step == t) return false;
  if (const auto* p = std::get_if<PeriodicRefresh>(&policy)) return t % p->every == 0;
  return layer.last_lowrank_grad_norm <= std::get<GradNormRefresh>(policy).threshold;
}

}  // namespace

void LorenzaConfig::validate() const {
  if (!(alpha > 0.0)) throw ConfigError("lorenza: alpha must be > 0");
  if (eta && !(*eta > 0.0)) throw ConfigError("lorenza: eta must be > 0");
  if (rank < 1) throw ConfigError("lorenza: rank must be >= 1");
  if (!(weight_decay >= 0.0)) throw ConfigError("lorenza: weight decay must be >= 0");
  if (const auto* p = std::get_if<PeriodicRefresh>(&refresh); p && p->every < 1)
    throw ConfigError("lorenza: refresh period must be >= 1");
  if (const auto* g = std::get_if<GradNormRefresh>(&refresh); g && std::isnan(g->threshold))
    throw ConfigError("lorenza: refresh threshold is NaN");
  if (power_iters < 0) throw ConfigError("lorenza: power_iters must be >= 0");
  if (q < 1) throw ConfigError("lorenza: q must be >= 1");
  if (!(mu > 0.0)) throw ConfigError("lorenza: mu must be > 0");
  validate_rho(rho);
  validate_moments(moments);
}

LorenzaState lorenza_init(const ParamSet& params, const LorenzaConfig& cfg, Objective& oracle,
                          const Batch& batch, const RngStream& rng) {
  cfg.validate();
  for (const auto& l : params) {
    if (cfg.rank > std::min(l.value.rows(), l.value.cols())) {
      std::ostringstream os;
      os << "lorenza: rank " << cfg.rank << " exceeds min dimension of layer '" << l.name
         << "' (" << l.value.rows() << "x" << l.value.cols() << ")";
      throw ConfigError(os.str());
    }
  }

  LorenzaState state;
  state.direction_rng = rng.split(kDirectionStream);
  state.sketch_rng = rng.split(kSketchStream);

  const GradSet g0 = oracle.gradient(params, batch);
  if (!all_finite(g0)) throw NumericalError("lorenza_init: non-finite gradient");

  for (std::size_t l = 0; l < params.size(); ++l) {
    const Matrix& g = g0[l].value;
    LorenzaLayerState layer;
    try {
      layer.sub = ssrf(g, cfg.rank, state.sketch_rng, {cfg.power_iters, 0});
    } catch (const DegenerateInputError&) {
      layer.sub = random_subspace(g, cfg.rank, state.sketch_rng, 0);
    } catch (const RankDeficiencyError&) {
      layer.sub = random_subspace(g, cfg.rank, state.sketch_rng, 0);
    }
    layer.m = Matrix(cfg.rank, g.cols());
    layer.v = Matrix(cfg.rank, g.cols());
    layer.last_refresh_step = 0;
    layer.last_lowrank_grad_norm = std::numeric_limits<double>::infinity();
    state.layers.push_back(std::move(layer));
  }
  return state;
}

RefreshOutcome maybe_refresh_subspace(LorenzaState& state, const ParamSet& params,
                                      Objective& oracle, const Batch& batch,
                                      const LorenzaConfig& cfg) {
  if (state.layers.size() != params.size())
    throw DimensionError("maybe_refresh_subspace: state does not match parameters");

  std::vector<std::size_t> due;
  for (std::size_t l = 0; l < state.layers.size(); ++l)
    if (refresh_due(state.layers[l], state.t, cfg.refresh)) due.push_back(l);
  RefreshOutcome out;
  if (due.empty()) return out;

  const GradSet g = oracle.gradient(params, batch);
  if (!all_finite(g)) throw NumericalError("maybe_refresh_subspace: non-finite gradient");
  out.refreshed = true;

  for (std::size_t l : due) {
    LorenzaLayerState& layer = state.layers[l];
    layer.last_refresh_step = state.t;
    try {
      layer.sub = ssrf(g[l].value, cfg.rank, state.sketch_rng, {cfg.power_iters, state.t});
    } catch (const DegenerateInputError&) {
      out.retained = true;
      continue;
    } catch (const RankDeficiencyError&) {
      out.retained = true;
      continue;
    }
    if (cfg.reset_moments_on_refresh) {
      layer.m *= 0.0;
      layer.v *= 0.0;
      layer.t = 0;
    }
  }
  return out;
}

GradSet lowrank_perturbation(LorenzaState& state, const ParamSet& params, Objective& oracle,
                             const Batch& batch, const LorenzaConfig& cfg) {
  if (state.layers.size() != params.size())
    throw DimensionError("lowrank_perturbation: state does not match parameters");
  SubspaceLowRank spec;
  spec.layers.reserve(state.layers.size());
  for (const auto& layer : state.layers) spec.layers.push_back({layer.sub.q, layer.sub.r});
  return estimate_gradient(oracle, params, batch, cfg.mu, cfg.q, spec, state.direction_rng).grads;
}

GradSet gsam_decompose(const GradSet& grad_unperturbed, const GradSet& grad_sam,
                       double alpha_gsam) {
  require_congruent(grad_unperturbed, grad_sam, "gsam_decompose");
  const double sam_sq = joint_norm_sq(grad_sam);
  if (!(sam_sq > 0.0)) throw DegeneratePerturbationError("gsam_decompose: SAM gradient is zero");
  const double proj = joint_dot(grad_unperturbed, grad_sam) / sam_sq;
  // g_perp = g - proj * g_sam
  const GradSet g_perp = add_scaled(grad_unperturbed, grad_sam, -proj);
  return add_scaled(grad_sam, g_perp, -alpha_gsam);
}

namespace {

StepReport step_impl(LorenzaState& state, ParamSet& params, Objective& oracle,
                     const Batch& batch, const LorenzaConfig& cfg, double current_lr,
                     bool perturb) {
  if (state.layers.size() != params.size())
    throw DimensionError("lorenza_step: state does not match parameters");
  if (!(current_lr > 0.0)) throw ConfigError("lorenza_step: learning rate must be > 0");

  LorenzaState next = state;
  StepReport report;
  const RefreshOutcome refresh = maybe_refresh_subspace(next, params, oracle, batch, cfg);
  report.refreshed = refresh.refreshed;
  report.refresh_retained = refresh.retained;

  GradSet g_sam;
  if (perturb) {
    report.rho = resolve_rho(cfg.rho, current_lr);
    const GradSet pert =
        scaled(lowrank_perturbation(next, params, oracle, batch, cfg), sign_factor(cfg.sign));
    report.perturbation_norm = joint_norm(pert);
    ParamSet probe_point;
    try {
      probe_point = ascent_perturb(params, pert, report.rho);
    } catch (const DegeneratePerturbationError&) {
      report.degenerate_perturbation = true;
      report.rho = 0.0;
      probe_point = params;
    }
    g_sam = oracle.gradient(probe_point, batch);
    if (cfg.gsam_alpha) {
      const GradSet g_plain = oracle.gradient(params, batch);
      try {
        g_sam = gsam_decompose(g_plain, g_sam, *cfg.gsam_alpha);
        report.gsam_applied = true;
      } catch (const DegeneratePerturbationError&) {
      }
    }
  } else {
    g_sam = oracle.gradient(params, batch);
  }
  if (!all_finite(g_sam)) throw NumericalError("lorenza_step: non-finite gradient");

  ParamSet updated = params;
  double lowrank_sq = 0.0;
  for (std::size_t l = 0; l < params.size(); ++l) {
    LorenzaLayerState& layer = next.layers[l];
    const Matrix g_low = matmul_tn(layer.sub.q, g_sam[l].value);  // r x n
    const Matrix dir = adam_direction(layer.m, layer.v, g_low, cfg.moments, layer.t);
    updated[l].value.add_scaled(matmul(layer.sub.q, dir), -current_lr);
    if (cfg.weight_decay > 0.0)
      updated[l].value.add_scaled(params[l].value, -current_lr * cfg.weight_decay);
    layer.t += 1;
    layer.last_lowrank_grad_norm = frobenius_norm(g_low);
    lowrank_sq += layer.last_lowrank_grad_norm * layer.last_lowrank_grad_norm;
  }
  if (!all_finite(updated)) throw NumericalError("lorenza_step: non-finite update");
  next.t = state.t + 1;
  report.lowrank_grad_norm = std::sqrt(lowrank_sq);

  state = std::move(next);
  params = std::move(updated);
  return report;
}

}  // namespace

StepReport lorenza_step(LorenzaState& state, ParamSet& params, Objective& oracle,
                        const Batch& batch, const LorenzaConfig& cfg, double current_lr) {
  return step_impl(state, params, oracle, batch, cfg, current_lr, true);
}

StepReport lowrank_adam_step(LorenzaState& state, ParamSet& params, Objective& oracle,
                             const Batch& batch, const LorenzaConfig& cfg, double current_lr) {
  return step_impl(state, params, oracle, batch, cfg, current_lr, false);
}

}  // namespace lorenza
