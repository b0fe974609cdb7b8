#pragma once

#include <functional>
#include <string>
#include <vector>

#include "dyttp/grad_check.hpp"
#include "dyttp/layers.hpp"
#include "dyttp/model.hpp"
#include "dyttp/ops.hpp"
#include "dyttp/training.hpp"

namespace dyttp::test {

struct GradCase {
  std::string name;
  double error = 0.0;
};

/// Finite-difference check (h = 1e-5) of every differentiable op, each
/// composed with a fixed random linear functional so every output
/// coordinate contributes.
inline std::vector<GradCase> op_grad_checks(std::uint64_t seed = 42) {
  Rng rng(seed);
  auto rnd = [&](Shape s, double lo = -1.0, double hi = 1.0) {
    std::vector<double> v(numel_of(s));
    for (auto& x : v) x = rng.uniform(lo, hi);
    return Tensor(std::move(s), std::move(v));
  };
  auto functional = [&](const Shape& s) { return rnd(s, -1.0, 1.0); };
  std::vector<GradCase> out;
  auto unary = [&](const std::string& name, const std::function<Tensor(const Tensor&)>& op, Tensor x) {
    const Tensor w = functional(op(x).shape());
    out.push_back({name, grad_check([&](const Tensor& t) { return sum_all(mul(op(t), w)); }, x)});
  };
  auto binary = [&](const std::string& name, const std::function<Tensor(const Tensor&, const Tensor&)>& op, Tensor a,
                    Tensor b) {
    const Tensor w = functional(op(a, b).shape());
    std::vector<Tensor> params{a, b};
    out.push_back({name, grad_check_params([&] { return sum_all(mul(op(params[0], params[1]), w)); }, params)});
  };

  binary("add", [](const Tensor& a, const Tensor& b) { return add(a, b); }, rnd({3, 4}), rnd({3, 4}));
  binary("add_broadcast", [](const Tensor& a, const Tensor& b) { return add(a, b); }, rnd({2, 3, 4}), rnd({3, 1}));
  binary("sub", [](const Tensor& a, const Tensor& b) { return sub(a, b); }, rnd({3, 4}), rnd({4}));
  binary("mul", [](const Tensor& a, const Tensor& b) { return mul(a, b); }, rnd({2, 1, 4}), rnd({3, 4}));
  binary("div", [](const Tensor& a, const Tensor& b) { return div(a, b); }, rnd({3, 4}), rnd({3, 1}, 0.5, 2.0));
  binary("matmul", [](const Tensor& a, const Tensor& b) { return matmul(a, b); }, rnd({3, 4}), rnd({4, 2}));
  binary("matmul_batched", [](const Tensor& a, const Tensor& b) { return matmul(a, b); }, rnd({2, 3, 4}),
         rnd({4, 5}));
  unary("neg", [](const Tensor& a) { return neg(a); }, rnd({5}));
  unary("exp", [](const Tensor& a) { return exp(a); }, rnd({5}));
  unary("log", [](const Tensor& a) { return log(a); }, rnd({5}, 0.2, 3.0));
  unary("tanh", [](const Tensor& a) { return tanh(a); }, rnd({8}));
  unary("abs", [](const Tensor& a) { return abs(a); }, rnd({6}, 0.1, 1.0));
  unary("softplus", [](const Tensor& a) { return softplus(a); }, rnd({6}, -4.0, 4.0));
  unary("relu", [](const Tensor& a) { return relu(a); }, rnd({6}, 0.1, 1.0));
  unary("sqrt", [](const Tensor& a) { return sqrt(a); }, rnd({6}, 0.2, 3.0));
  unary("scale", [](const Tensor& a) { return scale(a, -2.5); }, rnd({6}));
  unary("add_scalar", [](const Tensor& a) { return add_scalar(a, 0.7); }, rnd({6}));
  unary("clamp_min", [](const Tensor& a) { return clamp_min(a, -0.05); }, rnd({6}, 0.1, 1.0));
  unary("sum", [](const Tensor& a) { return sum(a, 1); }, rnd({3, 4}));
  unary("mean", [](const Tensor& a) { return mean(a, 0, true); }, rnd({3, 4}));
  unary("max", [](const Tensor& a) { return max(a, 1); }, rnd({3, 4}));
  unary("sum_all", [](const Tensor& a) { return sum_all(a); }, rnd({3, 4}));
  unary("softmax", [](const Tensor& a) { return softmax(a, 1); }, rnd({3, 4}));
  unary("softmax_axis0", [](const Tensor& a) { return softmax(a, 0); }, rnd({3, 4}));
  const std::vector<std::uint8_t> mask{1, 0, 1, 1, 0, 1, 1, 0, 1, 1, 1, 1};
  unary("masked_softmax", [&](const Tensor& a) { return masked_softmax(a, mask); }, rnd({3, 4}));
  unary("reshape", [](const Tensor& a) { return reshape(a, {4, 3}); }, rnd({3, 4}));
  unary("transpose", [](const Tensor& a) { return transpose(a, 0, 2); }, rnd({2, 3, 4}));
  unary("slice", [](const Tensor& a) { return slice(a, 1, 1, 2); }, rnd({3, 4}));
  const std::vector<std::size_t> idx{2, 0, 2};
  unary("index_select", [&](const Tensor& a) { return index_select(a, 0, idx); }, rnd({3, 4}));
  unary("concat", [](const Tensor& a) {
    const std::vector<Tensor> parts{a, scale(a, 2.0)};
    return concat(parts, 1);
  }, rnd({3, 2}));

  {
    DyTParams p = DyTParams::init(4, 0.8);
    p.gamma = rnd({4}, -2.0, 2.0);
    p.beta = rnd({4});
    p.gamma.set_requires_grad(true);
    p.beta.set_requires_grad(true);
    const Tensor x = rnd({3, 4}, -2.0, 2.0);
    const Tensor w = functional({3, 4});
    std::vector<Tensor> params{x, p.alpha, p.gamma, p.beta};
    out.push_back({"dyt", grad_check_params([&] {
                     const DyTParams q{params[1], params[2], params[3]};
                     return sum_all(mul(dyt_forward(params[0], q), w));
                   }, params)});
  }
  {
    LayerNormParams p = LayerNormParams::init(5);
    p.gamma = rnd({5}, -2.0, 2.0);
    p.beta = rnd({5});
    const Tensor x = rnd({3, 5}, -2.0, 2.0);
    const Tensor w = functional({3, 5});
    std::vector<Tensor> params{x, p.gamma, p.beta};
    out.push_back({"layernorm", grad_check_params([&] {
                     const LayerNormParams q{params[1], params[2], p.epsilon};
                     return sum_all(mul(layernorm_forward(params[0], q), w));
                   }, params)});
  }
  {
    const AttentionParams p = AttentionParams::init(4, 2, rng);
    const Tensor q = rnd({2, 3, 4});
    const Tensor kv = rnd({2, 5, 4});
    const Tensor w = functional({2, 3, 4});
    AttentionMask mask(2 * 3 * 5, 1);
    mask[1] = 0;
    mask[7] = 0;
    mask[20] = 0;
    ParamList named;
    p.collect(named, "a");
    std::vector<Tensor> params{q, kv};
    for (auto& n : named) params.push_back(n.value);
    out.push_back({"attention", grad_check_params([&] {
                     return sum_all(mul(mha_forward(params[0], params[1], &mask, p), w));
                   }, params)});
  }
  {
    const Tensor gt = rnd({4, 2}, -2.0, 2.0);
    const std::vector<std::uint8_t> valid{1, 0, 1, 1};
    std::vector<Tensor> params{rnd({2, 4, 2}, -2.0, 2.0), rnd({2, 4, 2}, 0.3, 2.0), softmax(rnd({2}), 0)};
    out.push_back({"laplace_nll", grad_check_params([&] {
                     const PredictionSet p{params[0], params[1], params[2]};
                     return regression_nll(p, 1, gt, valid);
                   }, params)});
    out.push_back({"cross_entropy", grad_check([&](const Tensor& t) { return classification_ce(t, 1); },
                                               softmax(rnd({3}), 0))});
  }
  return out;
}

/// Tiny-scenario backbone check: every parameter of the full model through
/// the training loss plus a random functional of all decoder outputs.
inline double backbone_grad_check(const ModelConfig& cfg, const Scenario& s, std::uint64_t seed = 5) {
  const Model m(cfg, seed);
  const ParamList named = m.named_parameters();
  std::vector<Tensor> params;
  for (const auto& p : named) params.push_back(p.value);
  Rng rng(seed + 1);
  auto rnd = [&](Shape shape) {
    std::vector<double> v(numel_of(shape));
    for (auto& x : v) x = rng.uniform(-1.0, 1.0);
    return Tensor(std::move(shape), std::move(v));
  };
  const std::size_t n = s.num_agents;
  const std::size_t k = cfg.modes;
  const std::size_t f = cfg.pred_len;
  const Tensor w_loc = rnd({n, k, f, 2});
  const Tensor w_scale = rnd({n, k, f, 2});
  const Tensor w_prob = rnd({n, k});
  return grad_check_params(
      [&] {
        const ModelOutput out = m.forward(s);
        const ScenarioLoss l = scenario_loss(out, s);
        Tensor total = add(l.reg_sum, l.cls_sum);
        total = add(total, sum_all(mul(out.locations, w_loc)));
        total = add(total, sum_all(mul(out.scales, w_scale)));
        return add(total, sum_all(mul(out.probs, w_prob)));
      },
      params);
}

}  // namespace dyttp::test
