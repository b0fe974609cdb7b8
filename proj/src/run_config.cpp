#include <fstream>
#include <set>

#include "dyttp/error.hpp"
#include "dyttp/persistence.hpp"

namespace dyttp {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& section) {
  if (!j.is_object()) throw FormatError("config section '" + section + "' must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw FormatError("unknown config key '" + section + "." + key + "'");
  }
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& section) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw FormatError("config key '" + section + "." + key + "': " + e.what());
  }
}

}  // namespace

ordered_json to_json(const ModelConfig& c) {
  return {{"width", c.width},
          {"heads", c.heads},
          {"blocks_per_stage", c.blocks_per_stage},
          {"modes", c.modes},
          {"obs_len", c.obs_len},
          {"pred_len", c.pred_len},
          {"ffn_ratio", c.ffn_ratio},
          {"radius", c.radius},
          {"position_scale", c.position_scale},
          {"offset_scale", c.offset_scale},
          {"min_scale", c.min_scale},
          {"dropout", c.dropout},
          {"norm", std::string(to_string(c.norm_kind))}};
}

ordered_json to_json(const GenConfig& c) {
  return {{"obs_len", c.obs_len},
          {"pred_len", c.pred_len},
          {"noise_sigma", c.noise_sigma},
          {"min_speed", c.min_speed},
          {"max_speed", c.max_speed},
          {"min_agents", c.min_agents},
          {"max_agents", c.max_agents},
          {"min_turn_radius", c.min_turn_radius},
          {"max_turn_radius", c.max_turn_radius},
          {"lane_width", c.lane_width},
          {"lane_spacing", c.lane_spacing},
          {"weight_straight", c.weight_straight},
          {"weight_left", c.weight_left},
          {"weight_right", c.weight_right},
          {"weight_lane_change", c.weight_lane_change}};
}

ordered_json to_json(const RunConfig& c) {
  const auto& t = c.train;
  return {{"seed", c.seed},
          {"output_dir", c.output_dir},
          {"model", to_json(c.model)},
          {"scheduler",
           {{"eta_min", t.scheduler.eta_min},
            {"eta_max", t.scheduler.eta_max},
            {"cycle_length", t.scheduler.cycle_length},
            {"num_cycles", t.scheduler.num_cycles}}},
          {"optimizer",
           {{"beta1", t.optimizer.beta1},
            {"beta2", t.optimizer.beta2},
            {"epsilon", t.optimizer.epsilon},
            {"weight_decay", t.optimizer.weight_decay},
            {"reset_on_restart", t.optimizer.reset_on_restart}}},
          {"train",
           {{"batch_size", t.batch_size}, {"lambda", t.lambda}, {"grad_clip", t.grad_clip}, {"val_subset", t.val_subset}}},
          {"ensemble",
           {{"strategy", std::string(to_string(c.ensemble.strategy))}, {"snapshots_used", c.ensemble.snapshots_used}}},
          {"data",
           {{"dataset", c.data.dataset},
            {"csv_dir", c.data.csv_dir},
            {"map_path", c.data.map_path},
            {"count", c.data.count},
            {"generator", to_json(c.data.gen)}}}};
}

ModelConfig model_config_from_json(const json& j, ModelConfig c) {
  const std::string s = "model";
  reject_unknown(j, {"width", "heads", "blocks_per_stage", "modes", "obs_len", "pred_len", "ffn_ratio", "radius",
                     "position_scale", "offset_scale", "min_scale", "dropout", "norm"},
                 s);
  read(j, "width", c.width, s);
  read(j, "heads", c.heads, s);
  read(j, "blocks_per_stage", c.blocks_per_stage, s);
  read(j, "modes", c.modes, s);
  read(j, "obs_len", c.obs_len, s);
  read(j, "pred_len", c.pred_len, s);
  read(j, "ffn_ratio", c.ffn_ratio, s);
  read(j, "radius", c.radius, s);
  read(j, "position_scale", c.position_scale, s);
  read(j, "offset_scale", c.offset_scale, s);
  read(j, "min_scale", c.min_scale, s);
  read(j, "dropout", c.dropout, s);
  std::string norm(to_string(c.norm_kind));
  read(j, "norm", norm, s);
  c.norm_kind = parse_norm_kind(norm);
  c.validate();
  return c;
}

GenConfig gen_config_from_json(const json& j, GenConfig c) {
  const std::string s = "data.generator";
  reject_unknown(j, {"obs_len", "pred_len", "noise_sigma", "min_speed", "max_speed", "min_agents", "max_agents",
                     "min_turn_radius", "max_turn_radius", "lane_width", "lane_spacing", "weight_straight",
                     "weight_left", "weight_right", "weight_lane_change"},
                 s);
  read(j, "obs_len", c.obs_len, s);
  read(j, "pred_len", c.pred_len, s);
  read(j, "noise_sigma", c.noise_sigma, s);
  read(j, "min_speed", c.min_speed, s);
  read(j, "max_speed", c.max_speed, s);
  read(j, "min_agents", c.min_agents, s);
  read(j, "max_agents", c.max_agents, s);
  read(j, "min_turn_radius", c.min_turn_radius, s);
  read(j, "max_turn_radius", c.max_turn_radius, s);
  read(j, "lane_width", c.lane_width, s);
  read(j, "lane_spacing", c.lane_spacing, s);
  read(j, "weight_straight", c.weight_straight, s);
  read(j, "weight_left", c.weight_left, s);
  read(j, "weight_right", c.weight_right, s);
  read(j, "weight_lane_change", c.weight_lane_change, s);
  c.validate();
  return c;
}

RunConfig run_config_from_json(const json& j, RunConfig c) {
  reject_unknown(j, {"seed", "output_dir", "model", "scheduler", "optimizer", "train", "ensemble", "data"}, "");
  read(j, "seed", c.seed, "");
  read(j, "output_dir", c.output_dir, "");
  if (j.contains("model")) c.model = model_config_from_json(j["model"], c.model);
  auto& t = c.train;
  if (j.contains("scheduler")) {
    const auto& s = j["scheduler"];
    reject_unknown(s, {"eta_min", "eta_max", "cycle_length", "num_cycles"}, "scheduler");
    read(s, "eta_min", t.scheduler.eta_min, "scheduler");
    read(s, "eta_max", t.scheduler.eta_max, "scheduler");
    read(s, "cycle_length", t.scheduler.cycle_length, "scheduler");
    read(s, "num_cycles", t.scheduler.num_cycles, "scheduler");
  }
  if (j.contains("optimizer")) {
    const auto& o = j["optimizer"];
    reject_unknown(o, {"beta1", "beta2", "epsilon", "weight_decay", "reset_on_restart"}, "optimizer");
    read(o, "beta1", t.optimizer.beta1, "optimizer");
    read(o, "beta2", t.optimizer.beta2, "optimizer");
    read(o, "epsilon", t.optimizer.epsilon, "optimizer");
    read(o, "weight_decay", t.optimizer.weight_decay, "optimizer");
    read(o, "reset_on_restart", t.optimizer.reset_on_restart, "optimizer");
  }
  if (j.contains("train")) {
    const auto& tr = j["train"];
    reject_unknown(tr, {"batch_size", "lambda", "grad_clip", "val_subset"}, "train");
    read(tr, "batch_size", t.batch_size, "train");
    read(tr, "lambda", t.lambda, "train");
    read(tr, "grad_clip", t.grad_clip, "train");
    read(tr, "val_subset", t.val_subset, "train");
  }
  if (j.contains("ensemble")) {
    const auto& e = j["ensemble"];
    reject_unknown(e, {"strategy", "snapshots_used"}, "ensemble");
    std::string strategy(to_string(c.ensemble.strategy));
    read(e, "strategy", strategy, "ensemble");
    c.ensemble.strategy = parse_ensemble_strategy(strategy);
    read(e, "snapshots_used", c.ensemble.snapshots_used, "ensemble");
  }
  if (j.contains("data")) {
    const auto& d = j["data"];
    reject_unknown(d, {"dataset", "csv_dir", "map_path", "count", "generator"}, "data");
    read(d, "dataset", c.data.dataset, "data");
    read(d, "csv_dir", c.data.csv_dir, "data");
    read(d, "map_path", c.data.map_path, "data");
    read(d, "count", c.data.count, "data");
    if (d.contains("generator")) c.data.gen = gen_config_from_json(d["generator"], c.data.gen);
  }
  t.seed = c.seed;
  t.scheduler.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError("config '" + path.string() + "': " + e.what());
  }
  return run_config_from_json(j);
}

}  // namespace dyttp
