#include "dyttp/grad_check.hpp"

#include <algorithm>
#include <cmath>

namespace dyttp {

double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double h) {
  Tensor probe = x.detach();
  probe.set_requires_grad(true);
  Tensor params[] = {probe};
  return grad_check_params([&] { return f(params[0]); }, params, h);
}

double grad_check_params(const std::function<Tensor()>& f, std::span<Tensor> params, double h) {
  std::vector<bool> previous;
  for (auto& p : params) {
    previous.push_back(p.requires_grad());
    p.set_requires_grad(true);
    p.zero_grad();
  }
  {
    Tape tape;
    Tape::Scope scope(tape);
    const Tensor loss = f();
    tape.backward(loss);
  }

  double worst = 0.0;
  for (auto& p : params) {
    const auto analytic = p.grad();
    auto values = p.data_mut();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + h;
      const double up = f().item();
      values[i] = saved - h;
      const double down = f().item();
      values[i] = saved;
      const double central = (up - down) / (2.0 * h);
      const double err = std::fabs(analytic[i] - central) / std::max(1.0, std::fabs(analytic[i]));
      worst = std::max(worst, err);
    }
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    params[i].zero_grad();
    params[i].set_requires_grad(previous[i]);
  }
  return worst;
}

}  // namespace dyttp
