#pragma once

#include <span>
#include <variant>
#include <vector>

#include "lorenza/matrix.hpp"
#include "lorenza/objective.hpp"
#include "lorenza/params.hpp"
#include "lorenza/rng.hpp"

namespace lorenza {

// Per-entry N(0, 1) directions over every layer.
struct FullGaussian {};

// Per-layer factors (Q: m x r, R: r x n); a direction for the layer is
// Q diag(u) R with u ~ N(0, I_r).
struct LowRankFactors {
  Matrix q;
  Matrix r;
};
struct SubspaceLowRank {
  std::vector<LowRankFactors> layers;
};

using DirectionSpec = std::variant<FullGaussian, SubspaceLowRank>;

// Orientation of the perturbation handed to the SAM step. Ascent uses the
// +grad estimate; Negated flips it.
enum class PerturbationSign { Ascent, Negated };

inline double sign_factor(PerturbationSign s) noexcept {
  return s == PerturbationSign::Ascent ? 1.0 : -1.0;
}

struct ZoEstimate {
  GradSet grads;
  int directions_used = 0;
  double smoothing = 0.0;
  // Central-difference coefficient of each direction, in draw order.
  std::vector<double> coefficients;
};

// One joint direction across all layers.
GradSet draw_direction(const ParamSet& params, const DirectionSpec& spec, RngStream& rng);

// (f(W + mu D) - f(W - mu D)) / (2 mu); two value calls.
double directional_coefficient(Objective& oracle, const ParamSet& params, const Batch& batch,
                               const GradSet& direction, double mu, int direction_index = 0);

// Randomized central-difference gradient estimate averaged over q directions.
// Issues exactly 2q value calls and no gradient calls.
ZoEstimate estimate_gradient(Objective& oracle, const ParamSet& params, const Batch& batch,
                             double mu, int q, const DirectionSpec& spec, RngStream& rng);

// Same estimator over caller-supplied directions.
ZoEstimate estimate_gradient_along(Objective& oracle, const ParamSet& params, const Batch& batch,
                                   double mu, std::span<const GradSet> directions);

// W + rho * pert / ||pert||_F, with the norm taken jointly over all layers.
// rho == 0 returns params unchanged. Throws DegeneratePerturbationError when
// rho > 0 and ||pert||_F < 1e-12.
ParamSet ascent_perturb(const ParamSet& params, const GradSet& pert, double rho);

}  // namespace lorenza
