#include <cmath>
#include <limits>

#include "dyttp/error.hpp"
#include "dyttp/ops.hpp"
#include "dyttp/training.hpp"

namespace dyttp {

namespace {

std::size_t last_valid_step(std::span<const std::uint8_t> valid) {
  for (std::size_t t = valid.size(); t-- > 0;)
    if (valid[t]) return t;
  throw DomainError("ground truth has no valid step");
}

void check_pred(const PredictionSet& pred, const Tensor& gt, std::span<const std::uint8_t> valid) {
  const auto& ls = pred.locations.shape();
  if (ls.size() != 3 || ls[2] != 2 || pred.scales.shape() != ls || pred.mode_probs.numel() != ls[0]) {
    throw ShapeError("malformed prediction set " + shape_to_string(ls));
  }
  if (gt.shape() != Shape{ls[1], 2} || valid.size() != ls[1]) {
    throw ShapeError("ground truth " + shape_to_string(gt.shape()) + " does not match horizon " + std::to_string(ls[1]));
  }
}

}  // namespace

Tensor regression_nll(const PredictionSet& pred, std::size_t mode, const Tensor& gt, std::span<const std::uint8_t> valid) {
  check_pred(pred, gt, valid);
  const std::size_t k = pred.modes();
  const std::size_t f = pred.horizon();
  if (mode >= k) throw ShapeError("mode index " + std::to_string(mode) + " out of range");
  for (double b : pred.scales.data()) {
    if (!(b > 0.0)) throw DomainError("Laplace scale must be positive");
  }
  const Tensor mu = reshape(slice(pred.locations, 0, mode, 1), {f, 2});
  const Tensor b = reshape(slice(pred.scales, 0, mode, 1), {f, 2});
  std::vector<double> m(f);
  for (std::size_t t = 0; t < f; ++t) m[t] = valid[t] ? 1.0 : 0.0;
  const Tensor terms = add(log(scale(b, 2.0)), div(abs(sub(gt, mu)), b));
  return sum_all(mul(terms, Tensor({f, 1}, std::move(m))));
}

std::size_t select_best_mode(const PredictionSet& pred, const Tensor& gt, std::span<const std::uint8_t> valid) {
  check_pred(pred, gt, valid);
  const std::size_t t = last_valid_step(valid);
  const Vec2 target{gt.data()[t * 2], gt.data()[t * 2 + 1]};
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < pred.modes(); ++k) {
    const double d = distance(pred.location(k, t), target);
    if (d < best_d) {
      best_d = d;
      best = k;
    }
  }
  return best;
}

Tensor classification_ce(const Tensor& mode_probs, std::size_t target) {
  if (target >= mode_probs.numel()) throw ShapeError("target mode out of range");
  const std::size_t idx[] = {target};
  const Tensor p = index_select(reshape(mode_probs, {mode_probs.numel()}), 0, idx);
  return reshape(neg(log(clamp_min(p, kProbabilityFloor))), {});
}

ScenarioLoss scenario_loss(const ModelOutput& out, const Scenario& s) {
  const std::size_t n = out.agents();
  const std::size_t k = out.probs.shape()[1];
  const std::size_t f = out.locations.shape()[2];
  if (n != s.num_agents || f != s.pred_len) throw ShapeError("model output does not match scenario '" + s.id + "'");

  std::vector<std::size_t> rows;
  std::vector<double> gt;
  std::vector<double> mask;
  const auto loc = out.locations.data();
  for (std::size_t a = 0; a < n; ++a) {
    if (!s.trainable(a)) continue;
    std::size_t last = 0;
    for (std::size_t t = 0; t < f; ++t) {
      if (s.fut_valid(a, t)) last = t;
    }
    const Vec2 target = s.fut(a, last);
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; m < k; ++m) {
      const std::size_t o = ((a * k + m) * f + last) * 2;
      const double d = distance({loc[o], loc[o + 1]}, target);
      if (d < best_d) {
        best_d = d;
        best = m;
      }
    }
    rows.push_back(a * k + best);
    for (std::size_t t = 0; t < f; ++t) {
      const Vec2 p = s.fut(a, t);
      gt.push_back(p.x);
      gt.push_back(p.y);
      mask.push_back(s.fut_valid(a, t) ? 1.0 : 0.0);
    }
  }
  ScenarioLoss result;
  result.agents = rows.size();
  if (rows.empty()) {
    result.reg_sum = Tensor::scalar(0.0);
    result.cls_sum = Tensor::scalar(0.0);
    return result;
  }
  const std::size_t a = rows.size();
  const Tensor mu = index_select(reshape(out.locations, {n * k, f, 2}), 0, rows);
  const Tensor b = index_select(reshape(out.scales, {n * k, f, 2}), 0, rows);
  const Tensor terms = add(log(scale(b, 2.0)), div(abs(sub(Tensor({a, f, 2}, std::move(gt)), mu)), b));
  result.reg_sum = sum_all(mul(terms, Tensor({a, f, 1}, std::move(mask))));
  const Tensor p = index_select(reshape(out.probs, {n * k}), 0, rows);
  result.cls_sum = sum_all(neg(log(clamp_min(p, kProbabilityFloor))));
  return result;
}

LossBreakdown combine_losses(std::span<const ScenarioLoss> parts, double lambda) {
  double reg = 0.0;
  double cls = 0.0;
  std::size_t agents = 0;
  for (const auto& l : parts) {
    reg += l.reg_sum.item();
    cls += l.cls_sum.item();
    agents += l.agents;
  }
  if (agents == 0) throw Error("batch has no trainable agent");
  LossBreakdown out;
  out.reg = reg / static_cast<double>(agents);
  out.cls = cls / static_cast<double>(agents);
  out.lambda = lambda;
  out.total = out.reg + lambda * out.cls;
  out.agents = agents;
  return out;
}

LossBreakdown total_loss(const Model& model, std::span<const Scenario> batch, double lambda) {
  if (batch.empty()) throw Error("total_loss on an empty batch");
  Tape::Pause pause;
  std::vector<ScenarioLoss> parts;
  for (const auto& s : batch) parts.push_back(scenario_loss(model.forward(s), s));
  return combine_losses(parts, lambda);
}

}  // namespace dyttp
