#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <regex>

#include "CLI11.hpp"
#include "dyttp/bytes.hpp"
#include "dyttp/data.hpp"
#include "dyttp/error.hpp"
#include "dyttp/evaluation.hpp"
#include "dyttp/persistence.hpp"
#include "dyttp/reports.hpp"
#include "dyttp/training.hpp"

namespace dyttp::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

class UsageError : public Error {
 public:
  using Error::Error;
};

/// Flags shared by every command that resolves a RunConfig. Precedence:
/// built-in defaults, then --config, then individual flags.
struct ConfigFlags {
  std::string config;
  std::string data;
  std::string csv_dir;
  std::string map;
  std::optional<std::size_t> count;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> norm;
  std::optional<std::size_t> width;
  std::optional<std::size_t> heads;
  std::optional<std::size_t> blocks;
  std::optional<std::size_t> modes;
  std::optional<std::size_t> cycles;
  std::optional<std::size_t> epochs_per_cycle;
  std::optional<std::size_t> batch_size;
  std::optional<double> eta_max;
  std::optional<double> eta_min;
  std::optional<double> lambda;
  std::optional<double> noise;
  std::optional<std::size_t> val_subset;

  void add_to(CLI::App& app) {
    app.add_option("--config", config, "JSON run config");
    app.add_option("--data", data, "binary scenario container");
    app.add_option("--csv-dir", csv_dir, "directory of forecasting CSV files");
    app.add_option("--map", map, "JSON lane map for --csv-dir");
    app.add_option("--count", count, "synthetic scenario count");
    app.add_option("--seed", seed, "run seed");
    app.add_option("--norm", norm, "dyt or layernorm")->check(CLI::IsMember({"dyt", "layernorm"}));
    app.add_option("--width", width, "model width D");
    app.add_option("--heads", heads, "attention heads");
    app.add_option("--blocks", blocks, "blocks per stage");
    app.add_option("--modes", modes, "trajectory modes K");
    app.add_option("--cycles", cycles, "number of learning-rate cycles");
    app.add_option("--epochs-per-cycle", epochs_per_cycle, "epochs per cycle");
    app.add_option("--batch-size", batch_size, "scenarios per batch");
    app.add_option("--eta-max", eta_max, "peak learning rate");
    app.add_option("--eta-min", eta_min, "floor learning rate");
    app.add_option("--lambda", lambda, "classification loss weight");
    app.add_option("--noise", noise, "synthetic positional noise sigma (m)");
    app.add_option("--val-subset", val_subset, "validation scenarios scored per epoch (0 = all)");
  }

  RunConfig resolve(RunConfig c) const {
    try {
      if (!config.empty()) c = load_run_config(config);
      if (!data.empty()) c.data.dataset = data;
      if (!csv_dir.empty()) c.data.csv_dir = csv_dir;
      if (!map.empty()) c.data.map_path = map;
      if (count) c.data.count = *count;
      if (seed) c.seed = *seed;
      if (norm) c.model.norm_kind = parse_norm_kind(*norm);
      if (width) c.model.width = *width;
      if (heads) c.model.heads = *heads;
      if (blocks) c.model.blocks_per_stage = *blocks;
      if (modes) c.model.modes = *modes;
      if (cycles) c.train.scheduler.num_cycles = *cycles;
      if (epochs_per_cycle) c.train.scheduler.cycle_length = *epochs_per_cycle;
      if (batch_size) c.train.batch_size = *batch_size;
      if (eta_max) c.train.scheduler.eta_max = *eta_max;
      if (eta_min) c.train.scheduler.eta_min = *eta_min;
      if (lambda) c.train.lambda = *lambda;
      if (noise) c.data.gen.noise_sigma = *noise;
      if (val_subset) c.train.val_subset = *val_subset;
      c.train.seed = c.seed;
      c.model.validate();
      c.train.scheduler.validate();
      c.data.gen.validate();
      if (c.train.batch_size == 0) throw Error("batch size must be >= 1");
      if (c.data.dataset.empty() && c.data.csv_dir.empty() && c.data.count == 0) {
        throw Error("scenario count must be >= 1");
      }
    } catch (const Error& e) {
      throw UsageError(e.what());
    }
    return c;
  }
};

DatasetSplit load_data(const RunConfig& c) {
  DatasetSplit split;
  if (!c.data.dataset.empty()) {
    split = load_scenarios(c.data.dataset);
  } else if (!c.data.csv_dir.empty()) {
    split = load_argoverse_dir(c.data.csv_dir, c.data.map_path, c.seed);
  } else {
    GenConfig gen = c.data.gen;
    gen.obs_len = c.model.obs_len;
    gen.pred_len = c.model.pred_len;
    split = generate_synthetic(c.data.count, c.seed, gen);
  }
  for (const auto* part : {&split.train, &split.val}) {
    for (const auto& s : *part) {
      if (s.obs_len != c.model.obs_len || s.pred_len != c.model.pred_len) {
        throw ShapeError("scenario '" + s.id + "' has " + std::to_string(s.obs_len) + "+" +
                         std::to_string(s.pred_len) + " steps, model expects " + std::to_string(c.model.obs_len) +
                         "+" + std::to_string(c.model.pred_len));
      }
    }
  }
  return split;
}

std::span<const Scenario> pick_split(const DatasetSplit& d, const std::string& which) {
  if (which == "train") return d.train;
  if (d.val.empty()) return d.train;
  return d.val;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw UsageError("cannot create output directory '" + dir.string() + "'");
}

std::string snapshot_name(std::size_t cycle) { return "snapshot_" + std::to_string(cycle) + ".ckpt"; }

/// snapshot_<c>.ckpt files of a run directory in cycle order.
std::vector<fs::path> run_checkpoints(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw UsageError("'" + dir.string() + "' is not a run directory");
  static const std::regex pattern(R"(snapshot_(\d+)\.ckpt)");
  std::vector<std::pair<std::size_t, fs::path>> found;
  for (const auto& entry : fs::directory_iterator(dir)) {
    std::smatch m;
    const std::string name = entry.path().filename().string();
    if (std::regex_match(name, m, pattern)) found.emplace_back(std::stoul(m[1].str()), entry.path());
  }
  std::sort(found.begin(), found.end());
  std::vector<fs::path> out;
  for (auto& [cycle, path] : found) out.push_back(path);
  if (out.empty()) throw Error("no snapshot_<cycle>.ckpt files in '" + dir.string() + "'");
  return out;
}

/// Checkpoint sources shared by evaluate and bench.
struct ModelFlags {
  std::string run_dir;
  std::vector<std::string> checkpoints;
  std::string ensemble = "off";
  std::size_t snapshots = 0;

  void add_to(CLI::App& app) {
    app.add_option("--run", run_dir, "training output directory (uses its config.json and snapshots)");
    app.add_option("--checkpoint", checkpoints, "checkpoint file; repeat for an ensemble");
    app.add_option("--ensemble", ensemble, "off, prediction_average or parameter_average")
        ->check(CLI::IsMember({"off", "prediction_average", "parameter_average"}));
    app.add_option("--snapshots", snapshots, "use the most recent S snapshots (0 = all)");
  }

  /// Run config: --config, else the run directory's archived config, else defaults.
  RunConfig base_config(const ConfigFlags& flags, bool& has_expected) const {
    RunConfig base;
    has_expected = !flags.config.empty();
    if (flags.config.empty() && !run_dir.empty() && fs::exists(fs::path(run_dir) / "config.json")) {
      try {
        base = load_run_config(fs::path(run_dir) / "config.json");
      } catch (const Error& e) {
        throw UsageError(e.what());
      }
      has_expected = true;
    }
    return flags.resolve(base);
  }

  std::vector<fs::path> paths() const {
    std::vector<fs::path> out(checkpoints.begin(), checkpoints.end());
    if (!run_dir.empty() && out.empty()) out = run_checkpoints(run_dir);
    return out;
  }

  EnsembleConfig ensemble_config() const {
    EnsembleConfig e;
    if (ensemble != "off") e.strategy = parse_ensemble_strategy(ensemble);
    e.snapshots_used = ensemble == "off" ? 1 : snapshots;
    return e;
  }
};

std::vector<Snapshot> load_snapshots(const std::vector<fs::path>& paths, const ModelConfig* expected) {
  std::vector<Snapshot> snaps;
  for (const auto& p : paths) snaps.push_back(expected ? load_checkpoint(p, *expected) : load_checkpoint(p));
  return snaps;
}

ordered_json ensemble_json(const EnsembleConfig& e, const Ensemble& model, bool off) {
  return {{"strategy", off ? std::string("off") : std::string(to_string(e.strategy))},
          {"snapshots_used", e.snapshots_used},
          {"members", model.members()}};
}

// ---------------------------------------------------------------------------

int cmd_gen_data(std::size_t count, std::uint64_t seed, double noise, const std::string& csv_dir,
                 const std::string& map, const std::string& out_path, std::ostream& out) {
  if (csv_dir.empty() && count == 0) throw UsageError("--count must be >= 1");
  DatasetSplit split;
  if (!csv_dir.empty()) {
    split = load_argoverse_dir(csv_dir, map, seed);
  } else {
    GenConfig gen;
    gen.noise_sigma = noise;
    try {
      gen.validate();
    } catch (const Error& e) {
      throw UsageError(e.what());
    }
    split = generate_synthetic(count, seed, gen);
  }
  try {
    save_scenarios(split, out_path);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  out << "wrote " << split.train.size() + split.val.size() << " scenarios (" << split.train.size() << " train / "
      << split.val.size() << " val) to " << out_path << '\n';
  return kExitOk;
}

int cmd_train(const ConfigFlags& flags, const std::string& out_flag, bool resume, std::ostream& out,
              std::ostream& err) {
  RunConfig c = flags.resolve({});
  if (!out_flag.empty()) c.output_dir = out_flag;
  const fs::path dir = c.output_dir;
  ensure_dir(dir);
  const std::string config_text = to_json(c).dump(2) + "\n";

  std::optional<TrainState> state;
  if (resume) {
    if (!fs::exists(dir / "train_state.bin")) throw Error("nothing to resume: no train_state.bin in '" + dir.string() + "'");
    if (fs::exists(dir / "config.json")) {
      RunConfig archived = load_run_config(dir / "config.json");
      archived.output_dir = c.output_dir;
      if (to_json(archived).dump(2) + "\n" != config_text) {
        throw CheckpointMismatch("resume config differs from the archived config in '" + dir.string() + "'");
      }
    }
    state = load_train_state(dir / "train_state.bin");
  }
  write_text(dir / "config.json", config_text);

  const DatasetSplit data = load_data(c);
  Model model(c.model, c.seed);
  out << "training " << to_string(c.model.norm_kind) << " model (D=" << c.model.width << ", K=" << c.model.modes
      << ", " << model.parameter_count() << " parameters) on " << data.train.size() << " scenarios (" << data.val.size()
      << " val), " << c.train.scheduler.num_cycles << " cycles x " << c.train.scheduler.cycle_length << " epochs\n";

  std::ofstream log;
  const fs::path log_path = dir / "train_log.jsonl";
  log.open(log_path, std::ios::trunc);
  if (!log) throw Error("cannot write '" + log_path.string() + "'");
  if (state) {
    for (const auto& r : state->log) log << r.to_json() << '\n';
    log.flush();
    out << "resuming at epoch " << state->next_epoch << '\n';
  }

  TrainCallbacks cb;
  cb.on_epoch = [&](const EpochRecord& r) {
    log << r.to_json() << '\n';
    log.flush();
    out << "epoch " << r.epoch << " cycle " << r.cycle << " lr " << format_fixed(r.lr, 6) << " loss "
        << format_fixed(r.train_loss, 4) << " val_minADE " << format_fixed(r.val_min_ade, 4) << '\n';
  };
  cb.on_snapshot = [&](const Snapshot& s) {
    save_checkpoint(s, dir / snapshot_name(s.cycle_index));
    out << "saved " << snapshot_name(s.cycle_index) << '\n';
  };
  cb.on_state = [&](const TrainState& st) { save_train_state(st, dir / "train_state.bin"); };

  try {
    const TrainResult result = train(model, data.train, data.val, c.train, cb, state ? &*state : nullptr);
    out << "finished: " << result.snapshots.size() << " snapshots in " << dir.string() << '\n';
  } catch (const DivergenceError& e) {
    err << "error: training diverged: " << e.what() << "; last good snapshot: "
        << (e.last_good_cycle ? (dir / snapshot_name(*e.last_good_cycle)).string() : std::string("none")) << '\n';
    return kExitDivergence;
  }
  return kExitOk;
}

int cmd_evaluate(const ConfigFlags& flags, const ModelFlags& mf, const std::string& split_name,
                 const std::string& json_path, std::size_t threads, std::ostream& out) {
  bool has_expected = false;
  const RunConfig c = mf.base_config(flags, has_expected);
  const auto paths = mf.paths();
  if (paths.empty()) throw UsageError("evaluate needs --run or --checkpoint");
  const std::vector<Snapshot> snaps = load_snapshots(paths, has_expected ? &c.model : nullptr);
  RunConfig data_cfg = c;
  data_cfg.model = snaps.back().config;
  const DatasetSplit data = load_data(data_cfg);

  const EnsembleConfig ens = mf.ensemble_config();
  const Ensemble predictor(snaps, ens);
  const auto scenarios = pick_split(data, split_name);
  const MetricsReport m =
      evaluate(scenarios, [&](const Scenario& s) { return predictor.predict(s); }, threads);

  ordered_json doc = report_header("evaluate", c.seed);
  doc["norm"] = to_string(snaps.back().config.norm_kind);
  doc["normalization_sites"] = "all";
  doc["split"] = split_name;
  doc["ensemble"] = ensemble_json(ens, predictor, mf.ensemble == "off");
  auto names = ordered_json::array();
  for (const auto& p : paths) names.push_back(p.filename().string());
  doc["checkpoints"] = std::move(names);
  doc["metrics"] = m.to_json();

  out << metrics_table(mf.ensemble == "off" ? paths.back().filename().string() : mf.ensemble, m);
  if (!json_path.empty()) {
    write_text(json_path, doc.dump(2) + "\n");
  } else {
    out << doc.dump(2) << '\n';
  }
  return kExitOk;
}

int cmd_bench(const ConfigFlags& flags, const ModelFlags& mf, std::size_t iterations, std::size_t warmup,
              const std::string& json_path, std::ostream& out) {
  if (iterations < 100) throw UsageError("--iterations must be >= 100");
  if (warmup < 10) throw UsageError("--warmup must be >= 10");
  bool has_expected = false;
  const RunConfig c = mf.base_config(flags, has_expected);
  const auto paths = mf.paths();
  std::vector<Snapshot> snaps = load_snapshots(paths, has_expected && !flags.norm ? &c.model : nullptr);

  const std::size_t members = std::max<std::size_t>(1, mf.ensemble == "off" ? 1 : mf.snapshots);
  if (snaps.empty() || flags.norm) {
    ModelConfig shape = snaps.empty() ? c.model : snaps.back().config;
    if (flags.norm) shape.norm_kind = parse_norm_kind(*flags.norm);
    const std::size_t n = snaps.empty() ? members : snaps.size();
    snaps.clear();
    for (std::size_t i = 0; i < n; ++i) snaps.push_back(capture_snapshot(Model(shape, c.seed + i), i, 0, 0.0));
  }
  RunConfig data_cfg = c;
  data_cfg.model = snaps.back().config;
  const DatasetSplit data = load_data(data_cfg);

  const EnsembleConfig ens = mf.ensemble_config();
  const Ensemble predictor(snaps, ens);
  const auto scenarios = pick_split(data, "val");
  const LatencyReport l =
      bench_latency([&](const Scenario& s) { predictor.predict(s); }, scenarios, iterations, warmup);

  const std::string norm(to_string(snaps.back().config.norm_kind));
  ordered_json doc = report_header("bench", c.seed);
  doc["norm"] = norm;
  doc["normalization_sites"] = "all";
  doc["ensemble"] = ensemble_json(ens, predictor, mf.ensemble == "off");
  doc["latency"] = l.to_json();
  out << latency_table(norm + (predictor.members() > 1 ? " x" + std::to_string(predictor.members()) : ""), l);
  if (!json_path.empty()) {
    write_text(json_path, doc.dump(2) + "\n");
  } else {
    out << doc.dump(2) << '\n';
  }
  return kExitOk;
}

std::string cell_file(const AblationCell& cell) {
  if (cell.dyt_enabled && cell.snapshot_enabled) return "cell_both.train_log.jsonl";
  if (cell.dyt_enabled) return "cell_dyt.train_log.jsonl";
  if (cell.snapshot_enabled) return "cell_snapshot.train_log.jsonl";
  return "cell_backbone.train_log.jsonl";
}

int cmd_ablate(const ConfigFlags& flags, const std::string& out_flag, std::size_t iterations, std::size_t warmup,
               std::size_t threads, std::ostream& out, std::ostream& err) {
  if (iterations < 100) throw UsageError("--iterations must be >= 100");
  if (warmup < 10) throw UsageError("--warmup must be >= 10");
  const RunConfig c = flags.resolve({});
  const fs::path dir = out_flag.empty() ? fs::path(c.output_dir) / "ablation" : fs::path(out_flag);
  ensure_dir(dir);
  const DatasetSplit data = load_data(c);

  AblationConfig cfg;
  cfg.model = c.model;
  cfg.train = c.train;
  cfg.init_seed = c.seed;
  cfg.bench_iterations = iterations;
  cfg.bench_warmup = warmup;
  cfg.threads = threads;
  const auto cells = run_ablation(data, cfg);

  const std::string table = ablation_table(cells);
  write_text(dir / "ablation.txt", table);
  write_text(dir / "ablation.json", ablation_json(cells, cfg).dump(2) + "\n");
  std::size_t ok = 0;
  for (const auto& cell : cells) {
    if (cell.ok) {
      ++ok;
      write_text(dir / cell_file(cell), cell.log_jsonl());
    } else {
      err << "cell " << cell.label() << " failed: " << cell.error << '\n';
    }
  }
  out << table;
  return ok > 0 ? kExitOk : kExitError;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Trajectory prediction with DynamicTanh normalization and snapshot ensembles", "dyttp"};
  app.require_subcommand(1);

  std::size_t gen_count = 1000;
  std::uint64_t gen_seed = 7;
  double gen_noise = 0.1;
  std::string gen_out;
  std::string gen_csv;
  std::string gen_map;
  auto* gen = app.add_subcommand("gen-data", "write a binary scenario container");
  gen->add_option("--count", gen_count, "synthetic scenario count");
  gen->add_option("--seed", gen_seed, "generator and split seed");
  gen->add_option("--noise", gen_noise, "positional noise sigma (m)");
  gen->add_option("--csv-dir", gen_csv, "convert a directory of forecasting CSV files instead");
  gen->add_option("--map", gen_map, "JSON lane map for --csv-dir");
  gen->add_option("--out", gen_out, "output file")->required();

  ConfigFlags train_flags;
  std::string train_out;
  bool train_resume = false;
  auto* tr = app.add_subcommand("train", "train with cyclic learning rate and save one snapshot per cycle");
  train_flags.add_to(*tr);
  tr->add_option("--out", train_out, "output directory (overrides output_dir)");
  tr->add_flag("--resume", train_resume, "continue from train_state.bin in the output directory");

  ConfigFlags eval_flags;
  ModelFlags eval_models;
  std::string eval_split = "val";
  std::string eval_json;
  std::size_t eval_threads = 0;
  auto* ev = app.add_subcommand("evaluate", "score a snapshot or snapshot ensemble");
  eval_flags.add_to(*ev);
  eval_models.add_to(*ev);
  ev->add_option("--split", eval_split, "val or train")->check(CLI::IsMember({"val", "train"}));
  ev->add_option("--json", eval_json, "write the JSON report here instead of stdout");
  ev->add_option("--threads", eval_threads, "evaluation threads (0 = DYTTP_THREADS or all cores)");

  ConfigFlags bench_flags;
  ModelFlags bench_models;
  std::size_t bench_iters = 1000;
  std::size_t bench_warmup = 10;
  std::string bench_json;
  auto* be = app.add_subcommand("bench", "measure single-scenario inference latency");
  bench_flags.add_to(*be);
  bench_models.add_to(*be);
  be->add_option("--iterations", bench_iters, "timed iterations (>= 100)");
  be->add_option("--warmup", bench_warmup, "untimed warm-up iterations");
  be->add_option("--json", bench_json, "write the JSON report here instead of stdout");

  ConfigFlags abl_flags;
  std::string abl_out;
  std::size_t abl_iters = 100;
  std::size_t abl_warmup = 10;
  std::size_t abl_threads = 0;
  auto* ab = app.add_subcommand("ablate", "train and score the DyT x snapshot grid");
  abl_flags.add_to(*ab);
  ab->add_option("--out", abl_out, "output directory");
  ab->add_option("--iterations", abl_iters, "latency iterations per cell");
  ab->add_option("--warmup", abl_warmup, "latency warm-up iterations per cell");
  ab->add_option("--threads", abl_threads, "evaluation threads (0 = DYTTP_THREADS or all cores)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << "run 'dyttp --help' for usage\n";
    return kExitUsage;
  }

  try {
    if (*gen) return cmd_gen_data(gen_count, gen_seed, gen_noise, gen_csv, gen_map, gen_out, out);
    if (*tr) return cmd_train(train_flags, train_out, train_resume, out, err);
    if (*ev) return cmd_evaluate(eval_flags, eval_models, eval_split, eval_json, eval_threads, out);
    if (*be) return cmd_bench(bench_flags, bench_models, bench_iters, bench_warmup, bench_json, out);
    if (*ab) return cmd_ablate(abl_flags, abl_out, abl_iters, abl_warmup, abl_threads, out, err);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DivergenceError& e) {
    err << "error: " << e.what() << '\n';
    return kExitDivergence;
  } catch (const CheckpointMismatch& e) {
    err << "error: " << e.what() << '\n';
    return kExitCheckpointMismatch;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitError;
  }
  return kExitUsage;
}

}  // namespace dyttp::cli
