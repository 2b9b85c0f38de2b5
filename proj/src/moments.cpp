#include "lorenza/moments.hpp"

#include <cmath>

#include "lorenza/errors.hpp"

namespace lorenza {

void validate_moments(const MomentConfig& cfg) {
  if (!(cfg.beta1 >= 0.0 && cfg.beta1 < 1.0)) throw ConfigError("beta1 must be in [0, 1)");
  if (!(cfg.beta2 >= 0.0 && cfg.beta2 < 1.0)) throw ConfigError("beta2 must be in [0, 1)");
  if (!(cfg.eps > 0.0)) throw ConfigError("eps must be > 0");
}

Matrix adam_direction(Matrix& m, Matrix& v, const Matrix& g, const MomentConfig& cfg,
                      std::int64_t completed_steps) {
  if (!m.same_shape(g) || !v.same_shape(g)) throw DimensionError("adam_direction: shape mismatch");
  const double t = static_cast<double>(completed_steps + 1);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  Matrix dir(g.rows(), g.cols());
  auto md = m.data();
  auto vd = v.data();
  auto gd = g.data();
  auto dd = dir.data();
  for (std::size_t k = 0; k < gd.size(); ++k) {
    md[k] = cfg.beta1 * md[k] + (1.0 - cfg.beta1) * gd[k];
    vd[k] = cfg.beta2 * vd[k] + (1.0 - cfg.beta2) * gd[k] * gd[k];
    const double m_hat = md[k] / c1;
    const double v_hat = vd[k] / c2;
    dd[k] = m_hat / (std::sqrt(v_hat) + cfg.eps);
  }
  return dir;
}

}  // namespace lorenza
