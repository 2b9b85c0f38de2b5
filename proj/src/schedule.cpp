#include "lorenza/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "lorenza/errors.hpp"

namespace lorenza {

double rho_schedule(const RhoSchedule& s, double lr) {
  if (s.lr_max == s.lr_min) throw ConfigError("rho_schedule: lr_max must differ from lr_min");
  if (s.rho_min > s.rho_max) throw ConfigError("rho_schedule: rho_min > rho_max");
  if (lr <= s.lr_min) return s.rho_min;
  if (lr >= s.lr_max) return s.rho_max;
  const double rho = s.rho_min + (s.rho_max - s.rho_min) * (lr - s.lr_min) / (s.lr_max - s.lr_min);
  return std::clamp(rho, s.rho_min, s.rho_max);
}

double cosine_lr(std::int64_t step, std::int64_t total, double lr_max, double lr_min) {
  if (total < 1) throw ConfigError("cosine_lr: total must be >= 1");
  if (step < 0 || step > total) throw ConfigError("cosine_lr: step outside [0, total]");
  if (step == total) return lr_min;
  if (step == 0) return lr_max;
  const double phase = std::numbers::pi * static_cast<double>(step) / static_cast<double>(total);
  return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + std::cos(phase));
}

double resolve_rho(const RhoSetting& rho, double current_lr) {
  if (const double* fixed = std::get_if<double>(&rho)) return *fixed;
  return rho_schedule(std::get<RhoSchedule>(rho), current_lr);
}

void validate_rho(const RhoSetting& rho) {
  if (const double* fixed = std::get_if<double>(&rho)) {
    if (!(*fixed >= 0.0) || !std::isfinite(*fixed)) throw ConfigError("rho must be >= 0");
    return;
  }
  const auto& s = std::get<RhoSchedule>(rho);
  if (!(s.rho_min >= 0.0) || s.rho_min > s.rho_max)
    throw ConfigError("rho schedule requires 0 <= rho_min <= rho_max");
  if (!(s.lr_min < s.lr_max)) throw ConfigError("rho schedule requires lr_min < lr_max");
}

}  // namespace lorenza
