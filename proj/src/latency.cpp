#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "dyttp/error.hpp"
#include "dyttp/evaluation.hpp"
#include "dyttp/layers.hpp"

namespace dyttp {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration<double, std::milli>(b - a).count();
}

}  // namespace

nlohmann::ordered_json LatencyReport::to_json() const {
  return {{"ave_ms", ave_ms},       {"std_ms", std_ms},         {"min_ms", min_ms},
          {"max_ms", max_ms},       {"iterations", iterations}, {"warmup_iterations", warmup_iterations}};
}

LatencyReport summarize_latency(std::span<const double> samples_ms, std::size_t warmup) {
  if (samples_ms.empty()) throw Error("latency summary needs at least one sample");
  LatencyReport r;
  r.iterations = samples_ms.size();
  r.warmup_iterations = warmup;
  const double n = static_cast<double>(samples_ms.size());
  r.ave_ms = std::accumulate(samples_ms.begin(), samples_ms.end(), 0.0) / n;
  double var = 0.0;
  for (double x : samples_ms) var += (x - r.ave_ms) * (x - r.ave_ms);
  r.std_ms = std::sqrt(var / n);
  const auto [lo, hi] = std::minmax_element(samples_ms.begin(), samples_ms.end());
  r.min_ms = *lo;
  r.max_ms = *hi;
  // Guard the order statistics against rounding in the mean.
  r.ave_ms = std::clamp(r.ave_ms, r.min_ms, r.max_ms);
  return r;
}

LatencyReport bench_latency(const std::function<void(const Scenario&)>& run, std::span<const Scenario> scenarios,
                            std::size_t iterations, std::size_t warmup) {
  if (iterations < 100) throw Error("latency benchmark needs >= 100 timed iterations");
  if (warmup < 10) throw Error("latency benchmark needs >= 10 warm-up iterations");
  if (scenarios.empty()) throw Error("latency benchmark needs at least one scenario");
  for (std::size_t i = 0; i < warmup; ++i) run(scenarios[i % scenarios.size()]);
  std::vector<double> samples(iterations);
  for (std::size_t i = 0; i < iterations; ++i) {
    const Scenario& s = scenarios[i % scenarios.size()];
    const auto t0 = Clock::now();
    run(s);
    const auto t1 = Clock::now();
    samples[i] = elapsed_ms(t0, t1);
  }
  return summarize_latency(samples, warmup);
}

NormBenchResult bench_norm_layers(const Shape& shape, std::size_t iterations, std::size_t warmup, std::uint64_t seed) {
  if (shape.empty()) throw ShapeError("norm benchmark needs a non-scalar shape");
  Rng rng(seed);
  std::vector<double> values(numel_of(shape));
  for (auto& v : values) v = rng.normal();
  const Tensor x(shape, std::move(values));
  const std::size_t c = shape.back();
  const DyTParams dyt = DyTParams::init(c);
  const LayerNormParams ln = LayerNormParams::init(c);
  Tape::Pause pause;

  double sink = 0.0;
  for (std::size_t i = 0; i < warmup; ++i) {
    sink += dyt_forward(x, dyt).data()[0];
    sink += layernorm_forward(x, ln).data()[0];
  }
  std::vector<double> t_dyt(iterations);
  std::vector<double> t_ln(iterations);
  for (std::size_t i = 0; i < iterations; ++i) {
    const auto time_dyt = [&] {
      const auto t0 = Clock::now();
      sink += dyt_forward(x, dyt).data()[0];
      t_dyt[i] = elapsed_ms(t0, Clock::now());
    };
    const auto time_ln = [&] {
      const auto t0 = Clock::now();
      sink += layernorm_forward(x, ln).data()[0];
      t_ln[i] = elapsed_ms(t0, Clock::now());
    };
    if (i % 2 == 0) {
      time_dyt();
      time_ln();
    } else {
      time_ln();
      time_dyt();
    }
  }
  if (!std::isfinite(sink)) throw Error("norm benchmark produced a non-finite output");
  return NormBenchResult{summarize_latency(t_dyt, warmup), summarize_latency(t_ln, warmup)};
}

}  // namespace dyttp
