#pragma once

#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "dyttp/data.hpp"
#include "dyttp/model.hpp"
#include "dyttp/ops.hpp"
#include "dyttp/rng.hpp"
#include "dyttp/scenario.hpp"

namespace dyttp::test {

inline Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0, bool requires_grad = false) {
  std::vector<double> v(numel_of(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor(std::move(shape), std::move(v), requires_grad);
}

inline bool bit_equal(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::memcmp(&a[i], &b[i], sizeof(double)) != 0) return false;
  }
  return true;
}

inline bool bit_equal(const Tensor& a, const Tensor& b) { return a.shape() == b.shape() && bit_equal(a.data(), b.data()); }

inline bool bit_equal(const PredictionSet& a, const PredictionSet& b) {
  return bit_equal(a.locations, b.locations) && bit_equal(a.scales, b.scales) && bit_equal(a.mode_probs, b.mode_probs);
}

inline Vec2 to_f32(Vec2 p) { return {static_cast<double>(static_cast<float>(p.x)), static_cast<double>(static_cast<float>(p.y))}; }

/// Scenario with `agents` agents moving along gently curving random paths and
/// `lanes` two-point lanes, all fully valid, with f32-representable coordinates.
inline Scenario tiny_scenario(std::size_t agents, std::size_t lanes, std::size_t obs, std::size_t pred,
                              std::uint64_t seed, double spread = 8.0) {
  Rng rng(seed);
  Scenario s;
  s.id = "tiny-" + std::to_string(seed);
  s.obs_len = obs;
  s.pred_len = pred;
  s.num_agents = agents;
  s.focal = 0;
  for (std::size_t a = 0; a < agents; ++a) {
    Vec2 p{rng.uniform(-spread, spread), rng.uniform(-spread, spread)};
    Vec2 v{rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5)};
    for (std::size_t t = 0; t < obs + pred; ++t) {
      p = p + v;
      v = v + Vec2{rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2)};
      if (t < obs) {
        s.history.push_back(to_f32(p));
        s.history_valid.push_back(1);
      } else {
        s.future.push_back(to_f32(p));
        s.future_valid.push_back(1);
      }
    }
  }
  for (std::size_t l = 0; l < lanes; ++l) {
    Vec2 a{rng.uniform(-spread, spread), rng.uniform(-spread, spread)};
    Vec2 b = a + Vec2{rng.uniform(2.0, 6.0), rng.uniform(-3.0, 3.0)};
    s.lanes.push_back(Polyline{"lane-" + std::to_string(l), {to_f32(a), to_f32(b)}});
  }
  s.validate();
  return s;
}

inline ModelConfig tiny_config(std::size_t obs = 4, std::size_t pred = 3) {
  ModelConfig c;
  c.width = 8;
  c.heads = 2;
  c.blocks_per_stage = 1;
  c.modes = 2;
  c.obs_len = obs;
  c.pred_len = pred;
  return c;
}

}  // namespace dyttp::test
