#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dyttp/data.hpp"
#include "dyttp/model.hpp"
#include "dyttp/training.hpp"
#include "json.hpp"

namespace dyttp {

// ---------------------------------------------------------------------------
// Configuration

struct DataConfig {
  std::string dataset;  // binary scenario container; empty = generate
  std::string csv_dir;  // Argoverse-style CSV directory; used when dataset is empty
  std::string map_path;
  std::size_t count = 1000;
  GenConfig gen;
};

struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  EnsembleConfig ensemble;
  DataConfig data;
  std::uint64_t seed = 7;  // data split, initialization and training order
  std::string output_dir = "run";
};

nlohmann::ordered_json to_json(const ModelConfig& c);
nlohmann::ordered_json to_json(const GenConfig& c);
nlohmann::ordered_json to_json(const RunConfig& c);

/// Unknown keys are rejected; missing keys keep their defaults.
ModelConfig model_config_from_json(const nlohmann::json& j, ModelConfig base = {});
GenConfig gen_config_from_json(const nlohmann::json& j, GenConfig base = {});
RunConfig run_config_from_json(const nlohmann::json& j, RunConfig base = {});
RunConfig load_run_config(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Checkpoints

inline constexpr char kCheckpointMagic[8] = {'D', 'Y', 'T', 'T', 'P', 'C', 'K', 'P'};
inline constexpr std::uint32_t kCheckpointFormatVersion = 1;

/// Little-endian: magic, version, total length, model config digest, rng
/// algorithm id, cycle index, epoch, validation minADE, model config JSON,
/// then per parameter its name, shape and f32 values; FNV-1a 64 checksum
/// trailer.
std::vector<std::uint8_t> encode_checkpoint(const Snapshot& snap);
Snapshot decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const Snapshot& snap, const std::filesystem::path& path);
Snapshot load_checkpoint(const std::filesystem::path& path);
/// Additionally requires the stored digest to equal `expected.digest()`;
/// throws CheckpointMismatch otherwise.
Snapshot load_checkpoint(const std::filesystem::path& path, const ModelConfig& expected);

// ---------------------------------------------------------------------------
// Resumable training state

std::vector<std::uint8_t> encode_train_state(const TrainState& st);
TrainState decode_train_state(std::span<const std::uint8_t> bytes);
void save_train_state(const TrainState& st, const std::filesystem::path& path);
TrainState load_train_state(const std::filesystem::path& path);

}  // namespace dyttp
