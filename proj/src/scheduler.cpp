#include <cmath>
#include <numbers>

#include "dyttp/error.hpp"
#include "dyttp/training.hpp"

namespace dyttp {

void SchedulerConfig::validate() const {
  if (!(eta_min >= 0.0 && eta_min < eta_max)) throw DomainError("scheduler needs 0 <= eta_min < eta_max");
  if (cycle_length < 1) throw DomainError("cycle length must be >= 1 epoch");
  if (num_cycles < 1) throw DomainError("num_cycles must be >= 1");
}

double lr_at(const SchedulerConfig& cfg, double epoch_in_cycle) {
  cfg.validate();
  const double e_i = static_cast<double>(cfg.cycle_length);
  if (!(epoch_in_cycle >= 0.0 && epoch_in_cycle <= e_i)) {
    throw DomainError("E_cur " + std::to_string(epoch_in_cycle) + " outside [0, " + std::to_string(cfg.cycle_length) +
                      "]");
  }
  return cfg.eta_min + 0.5 * (cfg.eta_max - cfg.eta_min) * (1.0 + std::cos(std::numbers::pi * epoch_in_cycle / e_i));
}

}  // namespace dyttp
