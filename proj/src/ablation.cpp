#include <sstream>

#include "dyttp/evaluation.hpp"

namespace dyttp {

std::string AblationCell::label() const {
  if (dyt_enabled && snapshot_enabled) return "+both";
  if (dyt_enabled) return "+DyT";
  if (snapshot_enabled) return "+Snapshot";
  return "backbone";
}

std::string AblationCell::log_jsonl() const {
  std::ostringstream out;
  for (const auto& r : training_log) out << r.to_json() << '\n';
  return out.str();
}

std::vector<AblationCell> run_ablation(const DatasetSplit& data, const AblationConfig& cfg) {
  std::vector<AblationCell> cells;
  for (const auto& [dyt, snapshot] : {std::pair{false, false}, {true, false}, {false, true}, {true, true}}) {
    AblationCell cell;
    cell.dyt_enabled = dyt;
    cell.snapshot_enabled = snapshot;
    cell.model = cfg.model;
    cell.model.norm_kind = dyt ? NormKind::dyt : NormKind::layernorm;
    cell.seed = cfg.train.seed;
    try {
      Model model(cell.model, cfg.init_seed);
      TrainResult run = train(model, data.train, data.val, cfg.train);
      cell.training_log = run.log;
      EnsembleConfig ens;
      ens.strategy = EnsembleStrategy::prediction_average;
      ens.snapshots_used = snapshot ? 0 : 1;
      const Ensemble predictor(run.snapshots, ens);
      const std::span<const Scenario> eval_set = data.val.empty() ? std::span<const Scenario>(data.train)
                                                                  : std::span<const Scenario>(data.val);
      cell.metrics = evaluate(eval_set, [&](const Scenario& s) { return predictor.predict(s); }, cfg.threads);
      cell.latency = bench_latency([&](const Scenario& s) { predictor.predict(s); }, eval_set, cfg.bench_iterations,
                                   cfg.bench_warmup);
      cell.ok = true;
    } catch (const std::exception& e) {
      cell.ok = false;
      cell.error = e.what();
    }
    cells.push_back(std::move(cell));
  }
  return cells;
}

}  // namespace dyttp
