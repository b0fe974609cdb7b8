#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace dyttp {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
  friend bool operator==(Vec2 a, Vec2 b) = default;
  double norm() const { return std::hypot(x, y); }
};

inline double distance(Vec2 a, Vec2 b) { return (a - b).norm(); }

struct Polyline {
  std::string id;
  std::vector<Vec2> points;

  friend bool operator==(const Polyline&, const Polyline&) = default;
};

/// Maneuver followed by the focal agent. Only synthetic scenarios know it.
enum class Maneuver : std::uint8_t { unknown = 0, straight = 1, left_turn = 2, right_turn = 3, lane_change = 4 };

std::string_view to_string(Maneuver m);

constexpr std::size_t kDefaultObsLen = 20;
constexpr std::size_t kDefaultPredLen = 30;
constexpr double kStepSeconds = 0.1;

/// One prediction instance: N agents observed for obs_len steps, with
/// pred_len ground-truth future steps each. Per-agent arrays are stored
/// row-major ([agent][step]).
struct Scenario {
  std::string id;
  std::size_t obs_len = kDefaultObsLen;
  std::size_t pred_len = kDefaultPredLen;
  std::size_t num_agents = 0;
  std::size_t focal = 0;
  Maneuver maneuver = Maneuver::unknown;

  std::vector<Vec2> history;               // [N * obs_len]
  std::vector<std::uint8_t> history_valid;  // [N * obs_len]
  std::vector<Vec2> future;                // [N * pred_len]
  std::vector<std::uint8_t> future_valid;   // [N * pred_len]
  std::vector<Polyline> lanes;

  Vec2 hist(std::size_t agent, std::size_t step) const { return history[agent * obs_len + step]; }
  bool hist_valid(std::size_t agent, std::size_t step) const { return history_valid[agent * obs_len + step] != 0; }
  Vec2 fut(std::size_t agent, std::size_t step) const { return future[agent * pred_len + step]; }
  bool fut_valid(std::size_t agent, std::size_t step) const { return future_valid[agent * pred_len + step] != 0; }

  std::size_t valid_history_steps(std::size_t agent) const;
  /// Agents with at least two observed steps and one valid future step; only
  /// these contribute to the training loss.
  bool trainable(std::size_t agent) const;
  /// Last valid observed position, if any.
  bool last_observed(std::size_t agent, Vec2& out) const;

  /// Throws FormatError when array sizes, focal validity or finiteness are off.
  void validate() const;

  void translate(Vec2 offset);

  friend bool operator==(const Scenario&, const Scenario&) = default;
};

struct DatasetSplit {
  std::vector<Scenario> train;
  std::vector<Scenario> val;
  std::uint64_t seed = 0;

  friend bool operator==(const DatasetSplit&, const DatasetSplit&) = default;
};

}  // namespace dyttp
