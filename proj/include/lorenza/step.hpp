#pragma once

#include <limits>

namespace lorenza {

// What happened inside one optimizer step, for logging.
struct StepReport {
  double rho = 0.0;  // radius actually applied
  double perturbation_norm = 0.0;
  bool degenerate_perturbation = false;  // fell back to an unperturbed gradient
  bool refreshed = false;                // low-rank subspace recomputed this step
  bool refresh_retained = false;         // refresh skipped, previous subspace kept
  bool gsam_applied = false;
  double lowrank_grad_norm = std::numeric_limits<double>::quiet_NaN();
};

}  // namespace lorenza
