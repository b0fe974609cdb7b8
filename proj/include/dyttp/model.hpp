#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dyttp/layers.hpp"
#include "dyttp/scenario.hpp"
#include "dyttp/tensor.hpp"

namespace dyttp {

struct ModelConfig {
  std::size_t width = 32;
  std::size_t heads = 4;
  std::size_t blocks_per_stage = 1;
  std::size_t modes = 3;
  std::size_t obs_len = kDefaultObsLen;
  std::size_t pred_len = kDefaultPredLen;
  std::size_t ffn_ratio = 2;
  double radius = 50.0;         // metres
  double position_scale = 10.0;  // relative positions are divided by this before embedding
  double offset_scale = 10.0;    // decoder location outputs are multiplied by this
  double min_scale = 1e-3;       // added to softplus scales
  double dropout = 0.0;
  NormKind norm_kind = NormKind::dyt;

  void validate() const;
  /// FNV-1a 64 over every field that shapes the parameter set or the
  /// forward computation (everything except dropout).
  std::uint64_t digest() const;
  BlockConfig block() const;
};

/// Candidate futures for one agent, world frame.
struct PredictionSet {
  Tensor locations;   // [K, F, 2]
  Tensor scales;      // [K, F, 2], > 0
  Tensor mode_probs;  // [K]

  std::size_t modes() const { return mode_probs.numel(); }
  std::size_t horizon() const { return locations.shape().empty() ? 0 : locations.shape()[1]; }
  Vec2 location(std::size_t k, std::size_t t) const;
};

struct EmbeddedInputs {
  Tensor agent_tokens;             // [N, T, D]
  Tensor lane_tokens;              // [M, D]
  std::vector<Vec2> segment_mids;  // [M], world frame
};

struct EncodedScene {
  Tensor embeddings;          // [N, D]
  std::vector<Vec2> origins;  // [N], world frame
};

/// Intermediate outputs of the four interaction stages.
struct EncodeTrace {
  Tensor agent_agent;  // [N, T, D]
  Tensor temporal;     // [N, D]
  Tensor agent_lane;   // [N, D]
  Tensor global;       // [N, D]
};

/// Batched decoder output for all N agents (tape-connected when recording).
struct ModelOutput {
  Tensor locations;  // [N, K, F, 2]
  Tensor scales;     // [N, K, F, 2]
  Tensor probs;      // [N, K]
  std::vector<Vec2> origins;

  std::size_t agents() const { return origins.size(); }
  /// Detached per-agent view.
  PredictionSet agent(std::size_t i) const;
};

/// Agent origin used for the agent-centric frame: last observed position, or
/// the focal agent's when the agent has no observed step.
std::vector<Vec2> agent_origins(const Scenario& s);

class Model {
 public:
  Model(const ModelConfig& cfg, std::uint64_t init_seed);
  Model(Model&&) = default;
  Model& operator=(Model&&) = default;
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  /// Independent copy with its own parameter storage.
  Model clone() const;

  const ModelConfig& config() const { return cfg_; }
  /// Every trainable tensor, in a fixed order, with stable dotted names.
  ParamList named_parameters() const;
  std::size_t parameter_count() const;
  /// Copies values into the parameters (same order and sizes as
  /// named_parameters); throws CheckpointMismatch otherwise.
  void load_values(const std::vector<std::vector<double>>& values);
  std::vector<std::vector<double>> values() const;

  EmbeddedInputs embed(const Scenario& s) const;
  EncodedScene encode(const Scenario& s, const ForwardContext& ctx = {}, EncodeTrace* trace = nullptr) const;
  ModelOutput decode(const EncodedScene& enc) const;
  ModelOutput forward(const Scenario& s, const ForwardContext& ctx = {}) const;
  /// Inference: no tape recording, one PredictionSet per agent.
  std::vector<PredictionSet> predict(const Scenario& s) const;

  /// Zeroes the decoder location head (all modes then predict the origin).
  void zero_location_head();

 private:
  void check_scenario(const Scenario& s) const;

  ModelConfig cfg_;
  Linear agent_embed_;  // displacement -> D, no bias
  Tensor step_embed_;   // [T, D]
  Linear lane_embed_;   // segment direction -> D
  Linear rel_embed_;    // relative agent position -> D
  Linear lane_pos_embed_;  // segment midpoint relative to the agent -> D
  std::vector<TransformerBlock> agent_agent_;
  std::vector<TransformerBlock> temporal_;
  std::vector<TransformerBlock> agent_lane_;
  std::vector<TransformerBlock> global_;
  Norm final_norm_;
  Linear head_hidden_;
  Linear head_location_;
  Linear head_scale_;
  Linear head_logits_;
};

}  // namespace dyttp
