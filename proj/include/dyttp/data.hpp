#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dyttp/rng.hpp"
#include "dyttp/scenario.hpp"

namespace dyttp {

// ---------------------------------------------------------------------------
// Synthetic scenarios

struct GenConfig {
  std::size_t obs_len = kDefaultObsLen;
  std::size_t pred_len = kDefaultPredLen;
  double noise_sigma = 0.1;
  double min_speed = 2.0;
  double max_speed = 15.0;
  std::size_t min_agents = 1;
  std::size_t max_agents = 6;
  double min_turn_radius = 12.0;
  double max_turn_radius = 40.0;
  double lane_width = 3.5;
  double lane_spacing = 5.0;  // distance between emitted lane polyline points
  // Focal maneuver mix; normalized internally.
  double weight_straight = 0.40;
  double weight_left = 0.25;
  double weight_right = 0.25;
  double weight_lane_change = 0.10;

  void validate() const;
};

/// Analytic path of one agent. Positions are parametrized by the distance s
/// travelled along the local +x axis (arc length on turns), then rotated by
/// `heading` and moved to `origin`.
struct AgentPath {
  Maneuver maneuver = Maneuver::straight;
  Vec2 origin;
  double heading = 0.0;
  double speed = 8.0;      // m/s along the path
  double start_s = 0.0;    // path coordinate at observed step 0
  double approach = 0.0;   // s where the turn / lane change begins
  double radius = 20.0;    // turns
  double sweep = 1.5707963267948966;  // turns, radians
  double side = 1.0;       // +1 left, -1 right
  double change_length = 30.0;  // lane change, metres of s
  double lane_width = 3.5;

  Vec2 position(double s) const;
  /// Position at time step k (0 = first observed step).
  Vec2 at_step(std::size_t k) const;
};

/// Deterministic scenario for `id`; content depends only on (id, seed, cfg).
/// When `paths` is non-null it receives the generating path of every agent.
Scenario generate_scenario(const std::string& id, std::uint64_t seed, const GenConfig& cfg,
                           std::vector<AgentPath>* paths = nullptr);

/// Single-agent scenario following `path` exactly, plus its centerline lane.
Scenario scenario_from_path(const std::string& id, const AgentPath& path, std::size_t obs_len = kDefaultObsLen,
                            std::size_t pred_len = kDefaultPredLen, double noise_sigma = 0.0, std::uint64_t seed = 0);

/// Pure function of (id, seed): true when the scenario belongs to validation
/// (one bucket in five).
bool is_validation_id(std::string_view id, std::uint64_t seed);

/// `count` scenarios split exactly round(0.8 * count) / rest into train/val.
/// Scenario ids are drawn in order and accepted only while their
/// hash-assigned side still has room, so the assignment stays a pure
/// function of (id, seed) and the counts are exact.
DatasetSplit generate_synthetic(std::size_t count, std::uint64_t seed, const GenConfig& cfg = {});

// ---------------------------------------------------------------------------
// Argoverse-style CSV + JSON lane map

/// Reads one forecasting CSV (TIMESTAMP, TRACK_ID, OBJECT_TYPE, X, Y,
/// CITY_NAME). Distinct timestamps are sorted and the first obs_len+pred_len
/// of them become the 10 Hz step grid. Agent order: the AGENT track first,
/// then the remaining tracks by TRACK_ID. `map_path` may be empty.
Scenario load_argoverse_csv(const std::filesystem::path& csv_path, const std::filesystem::path& map_path,
                            std::size_t obs_len = kDefaultObsLen, std::size_t pred_len = kDefaultPredLen);

/// Parses {"lanes": [{"id": "...", "points": [[x, y], ...]}, ...]}.
std::vector<Polyline> load_lane_map(const std::filesystem::path& path);

/// Every *.csv in `dir` (sorted by name) as a scenario, split by
/// is_validation_id.
DatasetSplit load_argoverse_dir(const std::filesystem::path& dir, const std::filesystem::path& map_path,
                                std::uint64_t seed);

// ---------------------------------------------------------------------------
// Binary scenario container

inline constexpr char kScenarioMagic[8] = {'D', 'Y', 'T', 'T', 'P', 'S', 'C', 'N'};
inline constexpr std::uint32_t kScenarioFormatVersion = 1;

/// Little-endian container: header (magic, version, total length, obs_len,
/// pred_len, seed, counts), one length-prefixed record per scenario with f32
/// coordinates, and a trailing FNV-1a 64 checksum of everything before it.
std::vector<std::uint8_t> encode_scenarios(const DatasetSplit& split);
DatasetSplit decode_scenarios(std::span<const std::uint8_t> bytes);

void save_scenarios(const DatasetSplit& split, const std::filesystem::path& path);
DatasetSplit load_scenarios(const std::filesystem::path& path);

}  // namespace dyttp
