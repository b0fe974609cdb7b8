#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "dyttp/evaluation.hpp"
#include "dyttp/rng.hpp"

namespace dyttp::test {

/// Textbook nested-loop metrics on plain arrays: pred[k][t] = {x, y}.
struct NaiveInstance {
  std::vector<std::vector<std::array<double, 2>>> pred;
  std::vector<std::array<double, 2>> gt;
  std::vector<std::uint8_t> valid;
};

inline double naive_dist(const std::array<double, 2>& a, const std::array<double, 2>& b) {
  const double dx = a[0] - b[0];
  const double dy = a[1] - b[1];
  return std::sqrt(dx * dx + dy * dy);
}

inline double naive_min_ade(const NaiveInstance& in) {
  double best = 0.0;
  bool first = true;
  for (const auto& mode : in.pred) {
    double total = 0.0;
    double n = 0.0;
    for (std::size_t t = 0; t < in.gt.size(); ++t) {
      if (!in.valid[t]) continue;
      total += naive_dist(mode[t], in.gt[t]);
      n += 1.0;
    }
    const double ade = total / n;
    if (first || ade < best) best = ade;
    first = false;
  }
  return best;
}

inline double naive_min_fde(const NaiveInstance& in) {
  const std::size_t last = in.gt.size() - 1;
  double best = 0.0;
  bool first = true;
  for (const auto& mode : in.pred) {
    const double fde = naive_dist(mode[last], in.gt[last]);
    if (first || fde < best) best = fde;
    first = false;
  }
  return best;
}

inline double naive_miss_rate(const std::vector<NaiveInstance>& all) {
  double misses = 0.0;
  double n = 0.0;
  for (const auto& in : all) {
    if (!in.valid.back()) continue;
    n += 1.0;
    if (naive_min_fde(in) > 2.0) misses += 1.0;
  }
  return misses / n;
}

inline PredictionSet to_prediction(const NaiveInstance& in) {
  const std::size_t k = in.pred.size();
  const std::size_t f = in.gt.size();
  std::vector<double> loc;
  for (const auto& mode : in.pred) {
    for (const auto& p : mode) {
      loc.push_back(p[0]);
      loc.push_back(p[1]);
    }
  }
  return PredictionSet{Tensor({k, f, 2}, loc), Tensor::ones({k, f, 2}), Tensor::full({k}, 1.0 / static_cast<double>(k))};
}

inline Tensor to_gt(const NaiveInstance& in) {
  std::vector<double> v;
  for (const auto& p : in.gt) {
    v.push_back(p[0]);
    v.push_back(p[1]);
  }
  return Tensor({in.gt.size(), 2}, v);
}

/// Random instance with K <= 4 and F <= 5. Ground truth sits on a 1/64 grid
/// and some endpoints are placed at an exact distance of 2.0 to exercise the miss boundary; roughly one in six
/// instances has an invalid final step.
inline NaiveInstance random_instance(Rng& rng) {
  NaiveInstance in;
  const std::size_t k = 1 + rng.below(4);
  const std::size_t f = 1 + rng.below(5);
  for (std::size_t t = 0; t < f; ++t) {
    in.gt.push_back({std::round(rng.uniform(-10, 10) * 64.0) / 64.0, std::round(rng.uniform(-10, 10) * 64.0) / 64.0});
    in.valid.push_back(rng.below(5) != 0 ? 1 : 0);
  }
  in.valid[rng.below(f)] = 1;
  if (rng.below(6) == 0 && f > 1) {
    in.valid.back() = 0;
    in.valid[0] = 1;
  }
  const double quantum = rng.below(2) == 0 ? 0.25 : 0.0;
  for (std::size_t m = 0; m < k; ++m) {
    std::vector<std::array<double, 2>> mode;
    for (std::size_t t = 0; t < f; ++t) {
      double dx = rng.uniform(-3, 3);
      double dy = rng.uniform(-3, 3);
      if (quantum > 0.0) {
        dx = std::round(dx / quantum) * quantum;
        dy = std::round(dy / quantum) * quantum;
      }
      mode.push_back({in.gt[t][0] + dx, in.gt[t][1] + dy});
    }
    in.pred.push_back(mode);
  }
  if (rng.below(4) == 0) {
    auto& end = in.pred[rng.below(k)].back();
    const auto& g = in.gt.back();
    switch (rng.below(4)) {
      case 0: end = {g[0] + 2.0, g[1]}; break;
      case 1: end = {g[0], g[1] - 2.0}; break;
      case 2: end = {g[0] - 2.0, g[1]}; break;
      default: end = {g[0], g[1] + 2.0}; break;
    }
  }
  return in;
}

struct MetricOracleResult {
  std::size_t instances = 0;
  std::size_t mismatches = 0;
  std::size_t boundary_instances = 0;
  bool boundary_rule_ok = false;
};

/// Compares the library metrics with the naive loops on `count` random
/// instances, requiring exact equality.
inline MetricOracleResult run_metric_oracle(std::size_t count, std::uint64_t seed) {
  Rng rng(seed);
  MetricOracleResult r;
  std::vector<NaiveInstance> all;
  std::vector<PredictionSet> preds;
  std::vector<Tensor> gts;
  std::vector<std::vector<std::uint8_t>> valids;
  for (std::size_t i = 0; i < count; ++i) {
    NaiveInstance in = random_instance(rng);
    const PredictionSet p = to_prediction(in);
    const Tensor g = to_gt(in);
    ++r.instances;
    if (min_ade(p, g, in.valid) != naive_min_ade(in)) ++r.mismatches;
    if (in.valid.back()) {
      if (min_fde(p, g, in.valid) != naive_min_fde(in)) ++r.mismatches;
      if (naive_min_fde(in) == 2.0) ++r.boundary_instances;
      const double mr_single = miss_rate(std::span(&p, 1), std::span(&g, 1), std::span(&in.valid, 1));
      if (mr_single != naive_miss_rate({in})) ++r.mismatches;
    }
    all.push_back(in);
    preds.push_back(p);
    gts.push_back(g);
    valids.push_back(in.valid);
  }
  if (miss_rate(preds, gts, valids) != naive_miss_rate(all)) ++r.mismatches;

  NaiveInstance edge;
  edge.gt = {{0, 0}, {1, 1}};
  edge.valid = {1, 1};
  edge.pred = {{{0, 0}, {1, 3}}};
  const PredictionSet ep = to_prediction(edge);
  const Tensor eg = to_gt(edge);
  r.boundary_rule_ok = min_fde(ep, eg, edge.valid) == 2.0 &&
                       miss_rate(std::span(&ep, 1), std::span(&eg, 1), std::span(&edge.valid, 1)) == 0.0;
  return r;
}

}  // namespace dyttp::test
