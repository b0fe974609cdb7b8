#include <array>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "dyttp/bytes.hpp"
#include "dyttp/data.hpp"
#include "dyttp/error.hpp"

namespace dyttp {

void GenConfig::validate() const {
  if (obs_len < 2 || pred_len < 1) throw Error("generator needs obs_len >= 2 and pred_len >= 1");
  if (!(noise_sigma >= 0.0)) throw DomainError("noise sigma must be >= 0");
  if (!(min_speed > 0.0 && max_speed >= min_speed)) throw DomainError("speed range must satisfy 0 < min <= max");
  if (min_agents < 1 || max_agents < min_agents) throw Error("agent count range must satisfy 1 <= min <= max");
  if (!(min_turn_radius > 0.0 && max_turn_radius >= min_turn_radius)) throw DomainError("bad turn radius range");
  if (!(lane_spacing > 0.0)) throw DomainError("lane spacing must be positive");
  const double w = weight_straight + weight_left + weight_right + weight_lane_change;
  if (!(weight_straight >= 0 && weight_left >= 0 && weight_right >= 0 && weight_lane_change >= 0 && w > 0)) {
    throw DomainError("maneuver weights must be non-negative with a positive sum");
  }
}

namespace {

Vec2 rotate(Vec2 v, double heading) {
  const double c = std::cos(heading);
  const double s = std::sin(heading);
  return {c * v.x - s * v.y, s * v.x + c * v.y};
}

Vec2 quantize(Vec2 p) { return {static_cast<double>(static_cast<float>(p.x)), static_cast<double>(static_cast<float>(p.y))}; }

Vec2 local_position(const AgentPath& p, double s) {
  switch (p.maneuver) {
    case Maneuver::left_turn:
    case Maneuver::right_turn: {
      if (s < p.approach) return {s, 0.0};
      const double phi = (s - p.approach) / p.radius;
      if (phi <= p.sweep) return {p.approach + p.radius * std::sin(phi), p.side * p.radius * (1.0 - std::cos(phi))};
      const Vec2 end{p.approach + p.radius * std::sin(p.sweep), p.side * p.radius * (1.0 - std::cos(p.sweep))};
      const double rest = s - p.approach - p.radius * p.sweep;
      return end + rest * Vec2{std::cos(p.sweep), p.side * std::sin(p.sweep)};
    }
    case Maneuver::lane_change: {
      double u = (s - p.approach) / p.change_length;
      u = u < 0.0 ? 0.0 : (u > 1.0 ? 1.0 : u);
      return {s, p.side * p.lane_width * u * u * (3.0 - 2.0 * u)};
    }
    case Maneuver::straight:
    case Maneuver::unknown:
      break;
  }
  return {s, 0.0};
}

std::vector<Vec2> sample_lane(const AgentPath& p, double s_lo, double s_hi, double spacing, double lateral) {
  std::vector<Vec2> pts;
  const auto n = static_cast<std::size_t>(std::ceil((s_hi - s_lo) / spacing));
  for (std::size_t i = 0; i <= n; ++i) {
    const double s = i == n ? s_hi : s_lo + spacing * static_cast<double>(i);
    Vec2 local = lateral != 0.0 ? Vec2{s, lateral} : local_position(p, s);
    pts.push_back(quantize(p.origin + rotate(local, p.heading)));
  }
  return pts;
}

AgentPath straight_copy(const AgentPath& p) {
  AgentPath q = p;
  q.maneuver = Maneuver::straight;
  return q;
}

void emit_lanes(const AgentPath& p, double s_lo, double s_hi, double spacing, std::vector<Polyline>& lanes) {
  const auto add = [&](std::vector<Vec2> pts) {
    lanes.push_back({"lane-" + std::to_string(lanes.size()), std::move(pts)});
  };
  if (p.maneuver == Maneuver::lane_change) {
    add(sample_lane(straight_copy(p), s_lo, s_hi, spacing, 0.0));
    add(sample_lane(straight_copy(p), s_lo, s_hi, spacing, p.side * p.lane_width));
    return;
  }
  add(sample_lane(p, s_lo, s_hi, spacing, 0.0));
  if (p.maneuver == Maneuver::left_turn || p.maneuver == Maneuver::right_turn) {
    const double from = std::max(s_lo, p.approach);
    if (s_hi > from + spacing) add(sample_lane(straight_copy(p), from, s_hi, spacing, 0.0));
  }
}

Maneuver pick_maneuver(Rng& rng, const std::array<double, 4>& weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  double u = rng.uniform() * total;
  constexpr std::array<Maneuver, 4> kinds{Maneuver::straight, Maneuver::left_turn, Maneuver::right_turn,
                                          Maneuver::lane_change};
  for (std::size_t i = 0; i < 4; ++i) {
    if (u < weights[i]) return kinds[i];
    u -= weights[i];
  }
  return Maneuver::straight;
}

// Fills in maneuver-specific parameters relative to the last observed step.
void shape_path(AgentPath& p, Rng& rng, const GenConfig& cfg) {
  const double s_last = p.start_s + p.speed * kStepSeconds * static_cast<double>(cfg.obs_len - 1);
  p.lane_width = cfg.lane_width;
  switch (p.maneuver) {
    case Maneuver::left_turn:
    case Maneuver::right_turn:
      p.side = p.maneuver == Maneuver::left_turn ? 1.0 : -1.0;
      p.radius = rng.uniform(cfg.min_turn_radius, cfg.max_turn_radius);
      p.sweep = rng.uniform(std::numbers::pi / 3.0, std::numbers::pi / 2.0);
      p.approach = s_last + p.speed * rng.uniform(-1.0, 1.5);
      break;
    case Maneuver::lane_change:
      p.side = rng.uniform() < 0.5 ? 1.0 : -1.0;
      p.approach = s_last + p.speed * rng.uniform(-0.5, 1.0);
      p.change_length = p.speed * rng.uniform(2.5, 4.0);
      break;
    case Maneuver::straight:
    case Maneuver::unknown:
      p.approach = s_last;
      break;
  }
}

}  // namespace

Vec2 AgentPath::position(double s) const { return origin + rotate(local_position(*this, s), heading); }

Vec2 AgentPath::at_step(std::size_t k) const {
  return position(start_s + speed * kStepSeconds * static_cast<double>(k));
}

bool is_validation_id(std::string_view id, std::uint64_t seed) {
  return mix64(fnv1a64(id) ^ mix64(seed ^ 0x9e3779b97f4a7c15ULL)) % 5 == 0;
}

Scenario generate_scenario(const std::string& id, std::uint64_t seed, const GenConfig& cfg,
                           std::vector<AgentPath>* paths) {
  cfg.validate();
  Rng rng(mix64(fnv1a64(id) ^ mix64(seed)));
  const std::size_t T = cfg.obs_len;
  const std::size_t F = cfg.pred_len;
  const std::size_t n = cfg.min_agents + rng.below(cfg.max_agents - cfg.min_agents + 1);

  Scenario s;
  s.id = id;
  s.obs_len = T;
  s.pred_len = F;
  s.num_agents = n;
  s.focal = rng.below(n);
  s.history.assign(n * T, Vec2{});
  s.history_valid.assign(n * T, 0);
  s.future.assign(n * F, Vec2{});
  s.future_valid.assign(n * F, 0);

  AgentPath focal;
  focal.maneuver = pick_maneuver(rng, {cfg.weight_straight, cfg.weight_left, cfg.weight_right, cfg.weight_lane_change});
  focal.origin = {rng.uniform(-500.0, 500.0), rng.uniform(-500.0, 500.0)};
  focal.heading = rng.uniform(0.0, 2.0 * std::numbers::pi);
  focal.speed = rng.uniform(cfg.min_speed, cfg.max_speed);
  shape_path(focal, rng, cfg);
  s.maneuver = focal.maneuver;

  std::vector<AgentPath> agents(n);
  for (std::size_t a = 0; a < n; ++a) {
    if (a == s.focal) {
      agents[a] = focal;
      continue;
    }
    AgentPath p;
    p.maneuver = pick_maneuver(rng, {0.6, 0.15, 0.15, 0.1});
    const double u = rng.uniform();
    const double turn = u < 0.5 ? 0.0 : (u < 0.7 ? std::numbers::pi : (u < 0.85 ? 0.5 : -0.5) * std::numbers::pi);
    p.heading = focal.heading + turn;
    p.origin = focal.origin + rotate({rng.uniform(-30.0, 40.0), rng.uniform(-10.0, 10.0)}, focal.heading);
    p.speed = rng.uniform(cfg.min_speed, cfg.max_speed);
    shape_path(p, rng, cfg);
    agents[a] = p;
  }

  const double total_time = kStepSeconds * static_cast<double>(T + F - 1);
  for (std::size_t a = 0; a < n; ++a) {
    const AgentPath& p = agents[a];
    std::size_t first_hist = 0;
    std::size_t fut_end = F;
    if (a != s.focal) {
      const double u = rng.uniform();
      if (u < 0.05) {
        first_hist = T;
      } else if (u < 0.20) {
        first_hist = 1 + rng.below(T - 1);
      }
      if (rng.uniform() < 0.10) fut_end = 1 + rng.below(F);
    }
    const auto noisy = [&](Vec2 v) {
      if (cfg.noise_sigma > 0.0) v = v + Vec2{rng.normal(0.0, cfg.noise_sigma), rng.normal(0.0, cfg.noise_sigma)};
      return quantize(v);
    };
    for (std::size_t t = 0; t < T; ++t) {
      if (t < first_hist) continue;
      s.history[a * T + t] = noisy(p.at_step(t));
      s.history_valid[a * T + t] = 1;
    }
    for (std::size_t t = 0; t < fut_end; ++t) {
      s.future[a * F + t] = noisy(p.at_step(T + t));
      s.future_valid[a * F + t] = 1;
    }
    emit_lanes(p, p.start_s - 10.0, p.start_s + p.speed * total_time + 20.0, cfg.lane_spacing, s.lanes);
  }
  // Junction distractor: a straight-driving focal agent passes a turn-off it does not take.
  if (focal.maneuver == Maneuver::straight && rng.uniform() < 0.5) {
    AgentPath branch = focal;
    branch.maneuver = rng.uniform() < 0.5 ? Maneuver::left_turn : Maneuver::right_turn;
    shape_path(branch, rng, cfg);
    const double from = std::max(focal.start_s, branch.approach);
    s.lanes.push_back({"lane-" + std::to_string(s.lanes.size()),
                       sample_lane(branch, from, from + branch.radius * branch.sweep + 20.0, cfg.lane_spacing, 0.0)});
  }
  if (paths != nullptr) *paths = agents;
  return s;
}

Scenario scenario_from_path(const std::string& id, const AgentPath& path, std::size_t obs_len, std::size_t pred_len,
                            double noise_sigma, std::uint64_t seed) {
  if (obs_len < 2 || pred_len < 1) throw Error("scenario needs obs_len >= 2 and pred_len >= 1");
  Rng rng(mix64(fnv1a64(id) ^ mix64(seed)));
  Scenario s;
  s.id = id;
  s.obs_len = obs_len;
  s.pred_len = pred_len;
  s.num_agents = 1;
  s.focal = 0;
  s.maneuver = path.maneuver;
  const auto noisy = [&](Vec2 v) {
    if (noise_sigma > 0.0) v = v + Vec2{rng.normal(0.0, noise_sigma), rng.normal(0.0, noise_sigma)};
    return quantize(v);
  };
  for (std::size_t t = 0; t < obs_len; ++t) s.history.push_back(noisy(path.at_step(t)));
  for (std::size_t t = 0; t < pred_len; ++t) s.future.push_back(noisy(path.at_step(obs_len + t)));
  s.history_valid.assign(obs_len, 1);
  s.future_valid.assign(pred_len, 1);
  const double total = path.speed * kStepSeconds * static_cast<double>(obs_len + pred_len - 1);
  emit_lanes(path, path.start_s - 10.0, path.start_s + total + 20.0, 5.0, s.lanes);
  return s;
}

DatasetSplit generate_synthetic(std::size_t count, std::uint64_t seed, const GenConfig& cfg) {
  if (count < 1) throw Error("dataset count must be >= 1");
  cfg.validate();
  const std::size_t want_train = (count * 8 + 5) / 10;
  const std::size_t want_val = count - want_train;
  DatasetSplit split;
  split.seed = seed;
  char id[64];
  for (std::uint64_t c = 0; split.train.size() < want_train || split.val.size() < want_val; ++c) {
    std::snprintf(id, sizeof id, "syn-%llu-%06llu", static_cast<unsigned long long>(seed),
                  static_cast<unsigned long long>(c));
    if (is_validation_id(id, seed)) {
      if (split.val.size() < want_val) split.val.push_back(generate_scenario(id, seed, cfg));
    } else if (split.train.size() < want_train) {
      split.train.push_back(generate_scenario(id, seed, cfg));
    }
  }
  return split;
}

}  // namespace dyttp
