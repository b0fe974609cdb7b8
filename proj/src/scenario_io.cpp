#include <algorithm>
#include <cstring>

#include "dyttp/bytes.hpp"
#include "dyttp/data.hpp"
#include "dyttp/error.hpp"

namespace dyttp {

namespace {

void write_points(ByteWriter& w, const std::vector<Vec2>& pts) {
  for (auto p : pts) {
    w.f32(static_cast<float>(p.x));
    w.f32(static_cast<float>(p.y));
  }
}

std::vector<Vec2> read_points(ByteReader& r, std::size_t n) {
  std::vector<Vec2> pts(n);
  for (auto& p : pts) {
    p.x = r.f32();
    p.y = r.f32();
  }
  return pts;
}

std::vector<std::uint8_t> encode_record(const Scenario& s) {
  ByteWriter w;
  w.str(s.id);
  w.u32(static_cast<std::uint32_t>(s.num_agents));
  w.u32(static_cast<std::uint32_t>(s.focal));
  w.u8(static_cast<std::uint8_t>(s.maneuver));
  write_points(w, s.history);
  w.raw(s.history_valid);
  write_points(w, s.future);
  w.raw(s.future_valid);
  w.u32(static_cast<std::uint32_t>(s.lanes.size()));
  for (const auto& lane : s.lanes) {
    w.str(lane.id);
    w.u32(static_cast<std::uint32_t>(lane.points.size()));
    write_points(w, lane.points);
  }
  return w.take();
}

Scenario decode_record(std::span<const std::uint8_t> bytes, std::size_t obs_len, std::size_t pred_len,
                       const std::string& what) {
  ByteReader r(bytes, what);
  Scenario s;
  s.id = r.str();
  s.obs_len = obs_len;
  s.pred_len = pred_len;
  s.num_agents = r.u32();
  s.focal = r.u32();
  const auto m = r.u8();
  if (m > static_cast<std::uint8_t>(Maneuver::lane_change)) throw FormatError(what + ": unknown maneuver code");
  s.maneuver = static_cast<Maneuver>(m);
  if (s.num_agents > r.remaining()) throw TruncationError(what + ": agent count exceeds record size");
  s.history = read_points(r, s.num_agents * obs_len);
  auto hv = r.raw(s.num_agents * obs_len);
  s.history_valid.assign(hv.begin(), hv.end());
  s.future = read_points(r, s.num_agents * pred_len);
  auto fv = r.raw(s.num_agents * pred_len);
  s.future_valid.assign(fv.begin(), fv.end());
  const auto lanes = r.u32();
  if (lanes > r.remaining()) throw TruncationError(what + ": lane count exceeds record size");
  for (std::uint32_t i = 0; i < lanes; ++i) {
    Polyline lane;
    lane.id = r.str();
    const auto n = r.u32();
    if (n > r.remaining() / 8) throw TruncationError(what + ": lane point count exceeds record size");
    lane.points = read_points(r, n);
    s.lanes.push_back(std::move(lane));
  }
  if (r.remaining() != 0) throw FormatError(what + ": trailing bytes in record");
  s.validate();
  return s;
}

}  // namespace

std::vector<std::uint8_t> encode_scenarios(const DatasetSplit& split) {
  std::size_t obs_len = kDefaultObsLen;
  std::size_t pred_len = kDefaultPredLen;
  const Scenario* first = !split.train.empty() ? &split.train.front() : (!split.val.empty() ? &split.val.front() : nullptr);
  if (first != nullptr) {
    obs_len = first->obs_len;
    pred_len = first->pred_len;
  }
  ByteWriter w;
  w.begin_container(kScenarioMagic, kScenarioFormatVersion);
  w.u32(static_cast<std::uint32_t>(obs_len));
  w.u32(static_cast<std::uint32_t>(pred_len));
  w.u64(split.seed);
  w.u32(static_cast<std::uint32_t>(split.train.size()));
  w.u32(static_cast<std::uint32_t>(split.val.size()));
  for (const auto* part : {&split.train, &split.val}) {
    for (const auto& s : *part) {
      if (s.obs_len != obs_len || s.pred_len != pred_len) {
        throw FormatError("scenario '" + s.id + "' has horizons different from the rest of the split");
      }
      s.validate();
      const auto rec = encode_record(s);
      w.u32(static_cast<std::uint32_t>(rec.size()));
      w.raw(rec);
    }
  }
  w.end_container();
  return w.take();
}

DatasetSplit decode_scenarios(std::span<const std::uint8_t> bytes) {
  const std::string what = "scenario file";
  ByteReader r(open_container(bytes, kScenarioMagic, kScenarioFormatVersion, what), what);
  const std::size_t obs_len = r.u32();
  const std::size_t pred_len = r.u32();
  if (obs_len < 2 || pred_len < 1) throw FormatError(what + ": invalid horizons in header");
  DatasetSplit split;
  split.seed = r.u64();
  const std::size_t n_train = r.u32();
  const std::size_t n_val = r.u32();
  for (std::size_t i = 0; i < n_train + n_val; ++i) {
    const auto len = r.u32();
    const auto rec = r.raw(len);
    auto s = decode_record(rec, obs_len, pred_len, what + " record " + std::to_string(i));
    (i < n_train ? split.train : split.val).push_back(std::move(s));
  }
  if (r.remaining() != 0) throw FormatError(what + ": trailing bytes after last record");
  return split;
}

void save_scenarios(const DatasetSplit& split, const std::filesystem::path& path) {
  write_file(path, encode_scenarios(split));
}

DatasetSplit load_scenarios(const std::filesystem::path& path) {
  try {
    return decode_scenarios(read_file(path));
  } catch (const FormatError& e) {
    const std::string msg = "'" + path.string() + "': " + e.what();
    if (dynamic_cast<const TruncationError*>(&e)) throw TruncationError(msg);
    if (dynamic_cast<const CorruptionError*>(&e)) throw CorruptionError(msg);
    throw FormatError(msg);
  }
}

}  // namespace dyttp
