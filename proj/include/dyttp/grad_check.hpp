#pragma once

#include <functional>
#include <span>

#include "dyttp/tensor.hpp"

namespace dyttp {

/// Max over coordinates of |analytic - central| / max(1, |analytic|), where
/// central = (f(x + h e_i) - f(x - h e_i)) / (2h) and analytic comes from a
/// reverse pass through f. `f` must return a scalar tensor.
double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double h = 1e-5);

/// Same measure over every coordinate of every tensor in `params`. `f`
/// reads the parameters directly; they are perturbed in place and restored.
double grad_check_params(const std::function<Tensor()>& f, std::span<Tensor> params, double h = 1e-5);

}  // namespace dyttp
