#pragma once

#include <cstdint>

#include "lorenza/matrix.hpp"

namespace lorenza {

struct MomentConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

void validate_moments(const MomentConfig& cfg);

// Updates first/second moments with gradient g in place and returns the
// bias-corrected preconditioned direction Mhat / (sqrt(Vhat) + eps).
// `completed_steps` is the number of updates already folded into (m, v);
// bias correction uses completed_steps + 1.
//
// All Adam-family optimizers route through here so that reductions between
// them (e.g. zero perturbation radius) are bitwise exact.
Matrix adam_direction(Matrix& m, Matrix& v, const Matrix& g, const MomentConfig& cfg,
                      std::int64_t completed_steps);

}  // namespace lorenza
