#pragma once

#include <cstdint>
#include <variant>

namespace lorenza {

// Perturbation radius tied to the learning rate: rho moves affinely from
// rho_min at lr_min to rho_max at lr_max.
struct RhoSchedule {
  double rho_min = 1e-6;
  double rho_max = 0.01;
  double lr_min = 0.0;
  double lr_max = 1e-3;
};

// rho_min + (rho_max - rho_min)(lr - lr_min)/(lr_max - lr_min), clamped to
// [rho_min, rho_max]. Throws ConfigError if lr_max == lr_min.
double rho_schedule(const RhoSchedule& sched, double lr);

// lr_min + 0.5 (lr_max - lr_min)(1 + cos(pi step / total))
double cosine_lr(std::int64_t step, std::int64_t total, double lr_max, double lr_min);

// Either a constant radius or one driven by the current learning rate.
using RhoSetting = std::variant<double, RhoSchedule>;

double resolve_rho(const RhoSetting& rho, double current_lr);

void validate_rho(const RhoSetting& rho);

}  // namespace lorenza
