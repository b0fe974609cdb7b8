#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "dyttp/data.hpp"
#include "dyttp/error.hpp"
#include "json.hpp"

namespace dyttp {

namespace {

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_number(const std::string& text, const std::string& what, std::size_t line_no) {
  double v = 0.0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v)) {
    throw FormatError(what + ": line " + std::to_string(line_no) + ": '" + text + "' is not a finite number");
  }
  return v;
}

struct Row {
  double timestamp;
  Vec2 pos;
};

}  // namespace

std::vector<Polyline> load_lane_map(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open lane map '" + path.string() + "'");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("lane map '" + path.string() + "': " + e.what());
  }
  if (!doc.is_object() || !doc.contains("lanes") || !doc["lanes"].is_array()) {
    throw FormatError("lane map '" + path.string() + "': expected an object with a \"lanes\" array");
  }
  std::vector<Polyline> lanes;
  for (const auto& item : doc["lanes"]) {
    Polyline lane;
    try {
      lane.id = item.at("id").is_string() ? item.at("id").get<std::string>() : item.at("id").dump();
      for (const auto& pt : item.at("points")) {
        if (!pt.is_array() || pt.size() != 2) throw FormatError("point must be [x, y]");
        lane.points.push_back({pt[0].get<double>(), pt[1].get<double>()});
      }
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("lane map '" + path.string() + "': lane " + std::to_string(lanes.size()) + ": " + e.what());
    } catch (const FormatError& e) {
      throw FormatError("lane map '" + path.string() + "': lane " + std::to_string(lanes.size()) + ": " + e.what());
    }
    if (lane.points.size() < 2) {
      throw FormatError("lane map '" + path.string() + "': lane '" + lane.id + "' has fewer than 2 points");
    }
    for (auto p : lane.points) {
      if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw FormatError("lane map '" + path.string() + "': non-finite point");
    }
    lanes.push_back(std::move(lane));
  }
  return lanes;
}

Scenario load_argoverse_csv(const std::filesystem::path& csv_path, const std::filesystem::path& map_path,
                            std::size_t obs_len, std::size_t pred_len) {
  const std::string what = "csv '" + csv_path.string() + "'";
  std::ifstream in(csv_path);
  if (!in) throw Error("cannot open " + what);
  std::string line;
  if (!std::getline(in, line)) throw FormatError(what + ": missing header row");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);
  const auto header = split_row(line);
  const auto column = [&](const char* name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw FormatError(what + ": missing column " + name);
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t c_time = column("TIMESTAMP");
  const std::size_t c_track = column("TRACK_ID");
  const std::size_t c_type = column("OBJECT_TYPE");
  const std::size_t c_x = column("X");
  const std::size_t c_y = column("Y");
  column("CITY_NAME");

  std::map<std::string, std::vector<Row>> tracks;
  std::string agent_track;
  std::set<double> timestamps;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_row(line);
    if (cells.size() < header.size()) {
      throw FormatError(what + ": line " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                        " fields, expected " + std::to_string(header.size()));
    }
    Row r{parse_number(cells[c_time], what, line_no),
          {parse_number(cells[c_x], what, line_no), parse_number(cells[c_y], what, line_no)}};
    const std::string& track = cells[c_track];
    if (cells[c_type] == "AGENT") {
      if (!agent_track.empty() && agent_track != track) throw FormatError(what + ": more than one AGENT track");
      agent_track = track;
    }
    tracks[track].push_back(r);
    timestamps.insert(r.timestamp);
  }
  if (agent_track.empty()) throw FormatError(what + ": no AGENT track");
  const std::size_t steps = obs_len + pred_len;
  if (timestamps.size() < steps) {
    throw TruncationError(what + ": " + std::to_string(timestamps.size()) + " distinct timestamps, need " +
                          std::to_string(steps));
  }
  std::map<double, std::size_t> step_of;
  for (double t : timestamps) {
    if (step_of.size() == steps) break;
    step_of.emplace(t, step_of.size());
  }

  std::vector<std::string> order{agent_track};
  for (const auto& [id, rows] : tracks)
    if (id != agent_track) order.push_back(id);

  Scenario s;
  s.id = csv_path.stem().string();
  s.obs_len = obs_len;
  s.pred_len = pred_len;
  s.num_agents = order.size();
  s.focal = 0;
  s.history.assign(s.num_agents * obs_len, Vec2{});
  s.history_valid.assign(s.num_agents * obs_len, 0);
  s.future.assign(s.num_agents * pred_len, Vec2{});
  s.future_valid.assign(s.num_agents * pred_len, 0);
  for (std::size_t a = 0; a < order.size(); ++a) {
    for (const Row& r : tracks[order[a]]) {
      auto it = step_of.find(r.timestamp);
      if (it == step_of.end()) continue;
      const std::size_t k = it->second;
      if (k < obs_len) {
        s.history[a * obs_len + k] = r.pos;
        s.history_valid[a * obs_len + k] = 1;
      } else {
        s.future[a * pred_len + k - obs_len] = r.pos;
        s.future_valid[a * pred_len + k - obs_len] = 1;
      }
    }
  }
  if (!map_path.empty()) s.lanes = load_lane_map(map_path);
  s.validate();
  return s;
}

DatasetSplit load_argoverse_dir(const std::filesystem::path& dir, const std::filesystem::path& map_path,
                                std::uint64_t seed) {
  if (!std::filesystem::is_directory(dir)) throw Error("'" + dir.string() + "' is not a directory");
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  DatasetSplit split;
  split.seed = seed;
  for (const auto& f : files) {
    Scenario s = load_argoverse_csv(f, map_path);
    (is_validation_id(s.id, seed) ? split.val : split.train).push_back(std::move(s));
  }
  return split;
}

}  // namespace dyttp
