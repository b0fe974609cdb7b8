#include "dyttp/scenario.hpp"

#include "dyttp/error.hpp"

namespace dyttp {

std::string_view to_string(Maneuver m) {
  switch (m) {
    case Maneuver::straight:
      return "straight";
    case Maneuver::left_turn:
      return "left_turn";
    case Maneuver::right_turn:
      return "right_turn";
    case Maneuver::lane_change:
      return "lane_change";
    case Maneuver::unknown:
      break;
  }
  return "unknown";
}

std::size_t Scenario::valid_history_steps(std::size_t agent) const {
  std::size_t n = 0;
  for (std::size_t t = 0; t < obs_len; ++t) n += hist_valid(agent, t) ? 1 : 0;
  return n;
}

bool Scenario::trainable(std::size_t agent) const {
  if (valid_history_steps(agent) < 2) return false;
  for (std::size_t t = 0; t < pred_len; ++t) {
    if (fut_valid(agent, t)) return true;
  }
  return false;
}

bool Scenario::last_observed(std::size_t agent, Vec2& out) const {
  for (std::size_t t = obs_len; t-- > 0;) {
    if (hist_valid(agent, t)) {
      out = hist(agent, t);
      return true;
    }
  }
  return false;
}

void Scenario::validate() const {
  const auto fail = [&](const std::string& what) { throw FormatError("scenario '" + id + "': " + what); };
  if (num_agents == 0) fail("no agents");
  if (history.size() != num_agents * obs_len || history_valid.size() != history.size()) fail("history size mismatch");
  if (future.size() != num_agents * pred_len || future_valid.size() != future.size()) fail("future size mismatch");
  if (focal >= num_agents) fail("focal index out of range");
  for (std::size_t t = 0; t < obs_len; ++t) {
    if (!hist_valid(focal, t)) fail("focal agent misses observed step " + std::to_string(t));
  }
  const auto finite = [](Vec2 p) { return std::isfinite(p.x) && std::isfinite(p.y); };
  for (auto p : history)
    if (!finite(p)) fail("non-finite history coordinate");
  for (auto p : future)
    if (!finite(p)) fail("non-finite future coordinate");
  for (const auto& lane : lanes) {
    if (lane.points.size() < 2) fail("lane '" + lane.id + "' has fewer than 2 points");
    for (auto p : lane.points)
      if (!finite(p)) fail("non-finite lane coordinate");
  }
}

void Scenario::translate(Vec2 offset) {
  for (auto& p : history) p = p + offset;
  for (auto& p : future) p = p + offset;
  for (auto& lane : lanes)
    for (auto& p : lane.points) p = p + offset;
}

}  // namespace dyttp
