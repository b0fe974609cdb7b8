#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dyttp/model.hpp"
#include "dyttp/scenario.hpp"
#include "dyttp/training.hpp"
#include "json.hpp"

namespace dyttp {

inline constexpr double kMissThreshold = 2.0;  // metres

// ---------------------------------------------------------------------------
// Metrics

struct MetricsReport {
  double min_ade = 0.0;
  double min_fde = 0.0;
  double miss_rate = 0.0;
  std::size_t count = 0;      // scenarios with at least one valid future step
  std::size_t fde_count = 0;  // scenarios whose final step is valid

  nlohmann::ordered_json to_json() const;
};

/// Minimum over modes of the mean Euclidean error over valid steps. Throws
/// DomainError when no step is valid.
double min_ade(const PredictionSet& pred, const Tensor& gt, std::span<const std::uint8_t> valid);
/// Minimum over modes of the final-step error. Throws DomainError when the
/// final step is invalid.
double min_fde(const PredictionSet& pred, const Tensor& gt, std::span<const std::uint8_t> valid);
/// Fraction of agents whose endpoint-best mode misses by more than 2 m.
/// Agents with an invalid final step are skipped; none left is an error.
double miss_rate(std::span<const PredictionSet> preds, std::span<const Tensor> gts,
                 std::span<const std::vector<std::uint8_t>> valids);

/// Future of one agent as a [F, 2] tensor plus its validity.
Tensor future_tensor(const Scenario& s, std::size_t agent);
std::vector<std::uint8_t> future_mask(const Scenario& s, std::size_t agent);

/// Produces one PredictionSet per agent. Must be safe to call concurrently.
using Predictor = std::function<std::vector<PredictionSet>(const Scenario&)>;

/// Focal-agent metrics over `scenarios`. Work is spread over `threads`
/// workers (0 = DYTTP_THREADS or the hardware concurrency); the result does
/// not depend on the thread count.
MetricsReport evaluate(std::span<const Scenario> scenarios, const Predictor& predictor, std::size_t threads = 0);

std::size_t default_threads();

/// Extrapolates the last observed velocity; single mode, unit scales.
PredictionSet constant_velocity(const Scenario& s, std::size_t agent);
std::vector<PredictionSet> constant_velocity_all(const Scenario& s);

// ---------------------------------------------------------------------------
// Latency

struct LatencyReport {
  double ave_ms = 0.0;
  double std_ms = 0.0;
  double min_ms = 0.0;
  double max_ms = 0.0;
  std::size_t iterations = 0;
  std::size_t warmup_iterations = 0;

  nlohmann::ordered_json to_json() const;
};

LatencyReport summarize_latency(std::span<const double> samples_ms, std::size_t warmup);

/// Times `run` once per iteration on scenarios taken in fixed round-robin
/// order, after `warmup` untimed calls. Needs iterations >= 100, warmup >= 10.
LatencyReport bench_latency(const std::function<void(const Scenario&)>& run, std::span<const Scenario> scenarios,
                            std::size_t iterations, std::size_t warmup);

struct NormBenchResult {
  LatencyReport dyt;
  LatencyReport layernorm;
};

/// Forward latency of a DyT and a LayerNorm layer on the same random input
/// of `shape` (last axis = channels), interleaved per iteration.
NormBenchResult bench_norm_layers(const Shape& shape, std::size_t iterations, std::size_t warmup,
                                  std::uint64_t seed = 1);

// ---------------------------------------------------------------------------
// Ablation

struct AblationCell {
  bool dyt_enabled = false;
  bool snapshot_enabled = false;
  bool ok = false;
  std::string error;
  MetricsReport metrics;
  LatencyReport latency;
  std::vector<EpochRecord> training_log;
  ModelConfig model;
  std::uint64_t seed = 0;

  std::string label() const;
  std::string log_jsonl() const;
};

struct AblationConfig {
  ModelConfig model;
  TrainConfig train;
  std::uint64_t init_seed = 7;
  std::size_t bench_iterations = 100;
  std::size_t bench_warmup = 10;
  std::size_t threads = 0;
};

/// Trains and evaluates the four {LayerNorm, DyT} x {final model, snapshot
/// ensemble} cells from the same initialization seed, in table order
/// backbone, +DyT, +Snapshot, +both. A failing cell is reported, not thrown.
std::vector<AblationCell> run_ablation(const DatasetSplit& data, const AblationConfig& cfg);

}  // namespace dyttp
