#include "lorenza/rge.hpp"

#include <cmath>
#include <sstream>

#include "lorenza/errors.hpp"

namespace lorenza {

namespace {

struct DirectionDrawer {
  const ParamSet& params;
  RngStream& rng;

  GradSet operator()(const FullGaussian&) const {
    GradSet d = params.zeros_like<GradTag>();
    for (auto& l : d) l.value = sample_gaussian(rng, l.value.rows(), l.value.cols(), 1.0);
    return d;
  }

  GradSet operator()(const SubspaceLowRank& s) const {
    if (s.layers.size() != params.size())
      throw DimensionError("SubspaceLowRank: factor count does not match layer count");
    GradSet d = params.zeros_like<GradTag>();
    for (std::size_t l = 0; l < params.size(); ++l) {
      const Matrix& q = s.layers[l].q;
      const Matrix& r = s.layers[l].r;
      const Matrix& w = params[l].value;
      if (q.rows() != w.rows() || r.cols() != w.cols() || q.cols() != r.rows())
        throw DimensionError("SubspaceLowRank: factors for layer '" + params[l].name +
                             "' are not shape-congruent");
      const Matrix u = sample_gaussian(rng, q.cols(), 1, 1.0);
      // Q diag(u) R == (Q scaled columnwise by u) R
      Matrix qu = q;
      for (std::size_t i = 0; i < qu.rows(); ++i)
        for (std::size_t k = 0; k < qu.cols(); ++k) qu(i, k) *= u(k, 0);
      d[l].value = matmul(qu, r);
    }
    return d;
  }
};

}  // namespace

GradSet draw_direction(const ParamSet& params, const DirectionSpec& spec, RngStream& rng) {
  return std::visit(DirectionDrawer{params, rng}, spec);
}

double directional_coefficient(Objective& oracle, const ParamSet& params, const Batch& batch,
                               const GradSet& direction, double mu, int direction_index) {
  if (!(mu > 0.0)) throw ConfigError("directional_coefficient: mu must be positive");
  const double up = oracle.value(add_scaled(params, direction, mu), batch);
  if (!std::isfinite(up)) {
    std::ostringstream os;
    os << "zeroth-order estimate: non-finite loss at direction " << direction_index
       << " with +mu perturbation";
    throw NumericalError(os.str());
  }
  const double down = oracle.value(add_scaled(params, direction, -mu), batch);
  if (!std::isfinite(down)) {
    std::ostringstream os;
    os << "zeroth-order estimate: non-finite loss at direction " << direction_index
       << " with -mu perturbation";
    throw NumericalError(os.str());
  }
  return (up - down) / (2.0 * mu);
}

ZoEstimate estimate_gradient(Objective& oracle, const ParamSet& params, const Batch& batch,
                             double mu, int q, const DirectionSpec& spec, RngStream& rng) {
  if (!(mu > 0.0)) throw ConfigError("estimate_gradient: mu must be positive");
  if (q < 1) throw ConfigError("estimate_gradient: q must be >= 1");
  ZoEstimate est{params.zeros_like<GradTag>(), q, mu, {}};
  est.coefficients.reserve(static_cast<std::size_t>(q));
  const double inv_q = 1.0 / static_cast<double>(q);
  for (int j = 0; j < q; ++j) {
    const GradSet d = draw_direction(params, spec, rng);
    const double c = directional_coefficient(oracle, params, batch, d, mu, j);
    est.coefficients.push_back(c);
    est.grads = add_scaled(std::move(est.grads), d, c * inv_q);
  }
  return est;
}

ZoEstimate estimate_gradient_along(Objective& oracle, const ParamSet& params, const Batch& batch,
                                   double mu, std::span<const GradSet> directions) {
  if (!(mu > 0.0)) throw ConfigError("estimate_gradient_along: mu must be positive");
  if (directions.empty()) throw ConfigError("estimate_gradient_along: no directions");
  const int q = static_cast<int>(directions.size());
  ZoEstimate est{params.zeros_like<GradTag>(), q, mu, {}};
  const double inv_q = 1.0 / static_cast<double>(q);
  for (int j = 0; j < q; ++j) {
    const GradSet& d = directions[static_cast<std::size_t>(j)];
    require_congruent(params, d, "estimate_gradient_along");
    const double c = directional_coefficient(oracle, params, batch, d, mu, j);
    est.coefficients.push_back(c);
    est.grads = add_scaled(std::move(est.grads), d, c * inv_q);
  }
  return est;
}

ParamSet ascent_perturb(const ParamSet& params, const GradSet& pert, double rho) {
  require_congruent(params, pert, "ascent_perturb");
  if (!(rho >= 0.0) || !std::isfinite(rho)) throw ConfigError("ascent_perturb: rho must be >= 0");
  if (rho == 0.0) return params;
  const double norm = joint_norm(pert);
  if (!std::isfinite(norm)) throw NumericalError("ascent_perturb: non-finite perturbation");
  if (norm < 1e-12) throw DegeneratePerturbationError("ascent_perturb: perturbation norm ~ 0");
  return add_scaled(params, pert, rho / norm);
}

}  // namespace lorenza
