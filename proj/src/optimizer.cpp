#include <cmath>

#include "dyttp/error.hpp"
#include "dyttp/training.hpp"

namespace dyttp {

void zero_grads(const ParamList& params) {
  for (const auto& p : params) p.value.impl().grad.clear();
}

void optimizer_step(const ParamList& params, double lr, AdamWState& state, const AdamWConfig& cfg) {
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.value.numel(), 0.0);
      state.v.emplace_back(p.value.numel(), 0.0);
    }
  }
  if (state.m.size() != params.size()) throw Error("optimizer state does not match the parameter list");
  for (const auto& p : params) {
    for (double g : p.value.impl().grad) {
      if (!std::isfinite(g)) throw DomainError("non-finite gradient in parameter '" + p.name + "'");
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& impl = params[i].value.impl();
    auto& m = state.m[i];
    auto& v = state.v[i];
    if (m.size() != impl.data.size()) throw Error("optimizer state size mismatch for '" + params[i].name + "'");
    for (std::size_t j = 0; j < impl.data.size(); ++j) {
      const double g = impl.grad.empty() ? 0.0 : impl.grad[j];
      m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g;
      v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g * g;
      const double update = (m[j] / bc1) / (std::sqrt(v[j] / bc2) + cfg.epsilon);
      impl.data[j] -= lr * (update + cfg.weight_decay * impl.data[j]);
    }
  }
}

}  // namespace dyttp
