#include <cmath>

#include "dyttp/error.hpp"
#include "dyttp/training.hpp"

namespace dyttp {

std::string_view to_string(EnsembleStrategy s) {
  return s == EnsembleStrategy::prediction_average ? "prediction_average" : "parameter_average";
}

EnsembleStrategy parse_ensemble_strategy(std::string_view text) {
  if (text == "prediction_average") return EnsembleStrategy::prediction_average;
  if (text == "parameter_average") return EnsembleStrategy::parameter_average;
  throw Error("unknown ensemble strategy '" + std::string(text) +
              "' (expected prediction_average or parameter_average)");
}

namespace {

void running_mean(std::vector<double>& mean, std::span<const double> x, std::size_t k) {
  if (k == 1) {
    mean.assign(x.begin(), x.end());
    return;
  }
  const double inv = static_cast<double>(k);
  for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += (x[i] - mean[i]) / inv;
}

}  // namespace

PredictionSet average_predictions(std::span<const PredictionSet> sets) {
  if (sets.empty()) throw Error("cannot average zero prediction sets");
  const Shape& shape = sets.front().locations.shape();
  std::vector<double> loc;
  std::vector<double> scl;
  std::vector<double> prob;
  for (std::size_t i = 0; i < sets.size(); ++i) {
    const auto& p = sets[i];
    if (p.locations.shape() != shape || p.scales.shape() != shape || p.mode_probs.numel() != shape[0]) {
      throw ShapeError("prediction sets to average have different shapes");
    }
    running_mean(loc, p.locations.data(), i + 1);
    running_mean(scl, p.scales.data(), i + 1);
    running_mean(prob, p.mode_probs.data(), i + 1);
  }
  double total = 0.0;
  for (double v : prob) total += v;
  if (std::abs(total - 1.0) > 1e-12) {
    for (double& v : prob) v /= total;
  }
  const std::size_t k = prob.size();
  return PredictionSet{Tensor(shape, std::move(loc)), Tensor(shape, std::move(scl)), Tensor({k}, std::move(prob))};
}

Ensemble::Ensemble(const std::vector<Snapshot>& snapshots, const EnsembleConfig& cfg) : cfg_(cfg) {
  if (snapshots.empty()) throw Error("ensemble needs at least one snapshot");
  const std::size_t used =
      cfg.snapshots_used == 0 ? snapshots.size() : std::min(cfg.snapshots_used, snapshots.size());
  const std::size_t first = snapshots.size() - used;
  const std::uint64_t digest = snapshots[first].config.digest();
  for (std::size_t i = first; i < snapshots.size(); ++i) {
    if (snapshots[i].config.digest() != digest || snapshots[i].params.size() != snapshots[first].params.size()) {
      throw CheckpointMismatch("snapshot " + std::to_string(snapshots[i].cycle_index) +
                               " has a different architecture from the rest of the ensemble");
    }
  }
  if (cfg.strategy == EnsembleStrategy::prediction_average) {
    for (std::size_t i = first; i < snapshots.size(); ++i) models_.push_back(snapshots[i].to_model());
    return;
  }
  std::vector<std::vector<double>> avg(snapshots[first].params.size());
  for (std::size_t i = first; i < snapshots.size(); ++i) {
    const auto& params = snapshots[i].params;
    for (std::size_t t = 0; t < params.size(); ++t) {
      if (i > first && params[t].size() != avg[t].size()) {
        throw CheckpointMismatch("snapshot parameter sizes differ within the ensemble");
      }
      running_mean(avg[t], params[t], i - first + 1);
    }
  }
  Model m(snapshots[first].config, 0);
  m.load_values(avg);
  models_.push_back(std::move(m));
}

std::vector<PredictionSet> Ensemble::predict(const Scenario& s) const {
  if (models_.size() == 1) return models_.front().predict(s);
  std::vector<std::vector<PredictionSet>> per_model;
  for (const auto& m : models_) per_model.push_back(m.predict(s));
  std::vector<PredictionSet> out;
  std::vector<PredictionSet> column(models_.size());
  for (std::size_t a = 0; a < s.num_agents; ++a) {
    for (std::size_t i = 0; i < models_.size(); ++i) column[i] = per_model[i][a];
    out.push_back(average_predictions(column));
  }
  return out;
}

std::vector<PredictionSet> ensemble_predict(const std::vector<Snapshot>& snapshots, const Scenario& s,
                                            const EnsembleConfig& cfg) {
  return Ensemble(snapshots, cfg).predict(s);
}

}  // namespace dyttp
