#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dyttp/model.hpp"
#include "dyttp/scenario.hpp"

namespace dyttp {

// ---------------------------------------------------------------------------
// Losses

inline constexpr double kProbabilityFloor = 1e-12;

struct LossBreakdown {
  double total = 0.0;
  double reg = 0.0;
  double cls = 0.0;
  double lambda = 1.0;
  std::size_t agents = 0;
};

/// Sum over valid steps and both coordinates of log(2b) + |y - mu|/b for the
/// selected mode. `gt` is [F, 2]; `valid` has F entries.
Tensor regression_nll(const PredictionSet& pred, std::size_t mode, const Tensor& gt,
                      std::span<const std::uint8_t> valid);

/// Mode whose final valid step lies closest to the ground truth; ties go to
/// the lowest index. Uses the last valid step when the final one is missing.
std::size_t select_best_mode(const PredictionSet& pred, const Tensor& gt, std::span<const std::uint8_t> valid);

/// -log(max(p[target], 1e-12)).
Tensor classification_ce(const Tensor& mode_probs, std::size_t target);

/// Loss sums of one scenario over its trainable agents (tape-connected).
struct ScenarioLoss {
  Tensor reg_sum;  // scalar
  Tensor cls_sum;  // scalar
  std::size_t agents = 0;
};

ScenarioLoss scenario_loss(const ModelOutput& out, const Scenario& s);

/// Averages the sums over all trainable agents: total = reg + lambda * cls.
/// Throws when no agent is trainable.
LossBreakdown combine_losses(std::span<const ScenarioLoss> parts, double lambda = 1.0);

/// reg and cls averaged over all trainable agents of the batch;
/// total = reg + lambda * cls. Throws when no agent is trainable.
LossBreakdown total_loss(const Model& model, std::span<const Scenario> batch, double lambda = 1.0);

// ---------------------------------------------------------------------------
// Learning-rate schedule

struct SchedulerConfig {
  double eta_min = 1e-5;
  double eta_max = 3e-3;
  std::size_t cycle_length = 8;  // epochs per cycle
  std::size_t num_cycles = 4;

  void validate() const;
};

/// eta_min + (eta_max - eta_min)(1 + cos(pi * e / E)) / 2 for e in [0, E].
double lr_at(const SchedulerConfig& cfg, double epoch_in_cycle);

// ---------------------------------------------------------------------------
// Optimizer

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 1e-4;
  bool reset_on_restart = false;
};

struct AdamWState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::uint64_t step = 0;

  void reset() {
    m.clear();
    v.clear();
    step = 0;
  }
};

/// Decoupled weight decay Adam update on every parameter, reading its
/// accumulated grad. Throws DomainError naming the first parameter with a
/// non-finite gradient (no parameter is modified in that case).
void optimizer_step(const ParamList& params, double lr, AdamWState& state, const AdamWConfig& cfg = {});

void zero_grads(const ParamList& params);

// ---------------------------------------------------------------------------
// Snapshots and training

struct Snapshot {
  std::size_t cycle_index = 0;
  std::size_t epoch = 0;  // global epoch count at capture
  double val_min_ade = 0.0;
  ModelConfig config;
  std::vector<std::vector<double>> params;  // f32-representable values

  Model to_model() const;
};

/// Captures the model's parameters, rounded to f32 (the storage precision of
/// checkpoints, so a saved snapshot reloads bit-identically).
Snapshot capture_snapshot(const Model& model, std::size_t cycle, std::size_t epoch, double val_min_ade);

struct TrainConfig {
  SchedulerConfig scheduler;
  AdamWConfig optimizer;
  std::size_t batch_size = 16;
  double lambda = 1.0;
  double grad_clip = 5.0;          // global L2 norm; <= 0 disables
  std::size_t val_subset = 0;      // 0 = evaluate on the whole validation set each epoch
  std::uint64_t seed = 7;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 0-based global epoch
  std::size_t cycle = 0;
  double lr = 0.0;        // learning rate at the start of the epoch
  double train_loss = 0.0;
  double val_min_ade = 0.0;
  double val_min_fde = 0.0;
  double val_mr = 0.0;

  std::string to_json() const;
};

/// Exact training position, so an interrupted run can continue bit-identically.
struct TrainState {
  std::size_t next_epoch = 0;
  std::vector<std::vector<double>> params;
  AdamWState optimizer;
  std::uint64_t rng_state = 0;
  std::vector<EpochRecord> log;
  std::vector<Snapshot> snapshots;
};

class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, std::optional<std::size_t> last_good_cycle)
      : Error(what), last_good_cycle(last_good_cycle) {}
  std::optional<std::size_t> last_good_cycle;
};

struct TrainCallbacks {
  std::function<void(const EpochRecord&)> on_epoch;
  std::function<void(const Snapshot&)> on_snapshot;
  /// Called after every epoch with the resumable state.
  std::function<void(const TrainState&)> on_state;
};

struct TrainResult {
  std::vector<Snapshot> snapshots;
  std::vector<EpochRecord> log;
};

/// Runs num_cycles * cycle_length epochs of mini-batch AdamW on `train`, with
/// the learning rate following the warm-restart cosine per iteration, and
/// captures one snapshot at the end of every cycle. `model` holds the final
/// parameters afterwards. Throws DivergenceError on a non-finite loss.
TrainResult train(Model& model, const std::vector<Scenario>& train_set, const std::vector<Scenario>& val_set,
                  const TrainConfig& cfg, const TrainCallbacks& callbacks = {},
                  const TrainState* resume = nullptr);

// ---------------------------------------------------------------------------
// Ensembles

enum class EnsembleStrategy { prediction_average, parameter_average };

std::string_view to_string(EnsembleStrategy s);
EnsembleStrategy parse_ensemble_strategy(std::string_view text);

struct EnsembleConfig {
  EnsembleStrategy strategy = EnsembleStrategy::prediction_average;
  std::size_t snapshots_used = 0;  // most recent S; 0 = all
};

/// Ready-to-run ensemble: one model per used snapshot (prediction average)
/// or a single averaged model (parameter average).
class Ensemble {
 public:
  Ensemble(const std::vector<Snapshot>& snapshots, const EnsembleConfig& cfg);

  std::vector<PredictionSet> predict(const Scenario& s) const;
  std::size_t members() const { return models_.size(); }
  const EnsembleConfig& config() const { return cfg_; }

 private:
  EnsembleConfig cfg_;
  std::vector<Model> models_;
};

std::vector<PredictionSet> ensemble_predict(const std::vector<Snapshot>& snapshots, const Scenario& s,
                                            const EnsembleConfig& cfg);

/// Element-wise running mean m += (x - m) / k over the sets; mode
/// probabilities are renormalized when their sum drifts from 1.
PredictionSet average_predictions(std::span<const PredictionSet> sets);

}  // namespace dyttp
