#include <cstring>

#include "dyttp/bytes.hpp"
#include "dyttp/error.hpp"
#include "dyttp/persistence.hpp"
#include "dyttp/rng.hpp"

namespace dyttp {

namespace {

constexpr char kStateMagic[8] = {'D', 'Y', 'T', 'T', 'P', 'T', 'R', 'S'};
constexpr std::uint32_t kStateFormatVersion = 1;

void write_snapshot_body(ByteWriter& w, const Snapshot& snap) {
  const Model shape_model(snap.config, 0);
  const ParamList params = shape_model.named_parameters();
  if (params.size() != snap.params.size()) {
    throw CheckpointMismatch("snapshot holds " + std::to_string(snap.params.size()) + " tensors, model config needs " +
                             std::to_string(params.size()));
  }
  w.u64(snap.config.digest());
  w.str(Rng::kAlgorithm);
  w.u32(static_cast<std::uint32_t>(snap.cycle_index));
  w.u32(static_cast<std::uint32_t>(snap.epoch));
  w.f64(snap.val_min_ade);
  w.str(to_json(snap.config).dump());
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& shape = params[i].value.shape();
    if (snap.params[i].size() != params[i].value.numel()) {
      throw CheckpointMismatch("parameter '" + params[i].name + "' size mismatch");
    }
    w.str(params[i].name);
    w.u32(static_cast<std::uint32_t>(shape.size()));
    for (auto d : shape) w.u32(static_cast<std::uint32_t>(d));
    for (double v : snap.params[i]) w.f32(static_cast<float>(v));
  }
}

Snapshot read_snapshot_body(ByteReader& r, const std::string& what) {
  Snapshot snap;
  const std::uint64_t digest = r.u64();
  const std::string rng_id = r.str();
  if (rng_id != Rng::kAlgorithm) {
    throw CheckpointMismatch(what + ": written with rng '" + rng_id + "', this build uses '" +
                             std::string(Rng::kAlgorithm) + "'");
  }
  snap.cycle_index = r.u32();
  snap.epoch = r.u32();
  snap.val_min_ade = r.f64();
  const std::string cfg_text = r.str();
  try {
    snap.config = model_config_from_json(nlohmann::json::parse(cfg_text));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(what + ": embedded model config is not valid JSON: " + e.what());
  }
  if (snap.config.digest() != digest) throw CorruptionError(what + ": config digest does not match embedded config");
  const Model shape_model(snap.config, 0);
  const ParamList params = shape_model.named_parameters();
  const auto count = r.u32();
  if (count != params.size()) {
    throw CheckpointMismatch(what + ": holds " + std::to_string(count) + " tensors, config needs " +
                             std::to_string(params.size()));
  }
  for (const auto& p : params) {
    const std::string name = r.str();
    if (name != p.name) throw CheckpointMismatch(what + ": expected parameter '" + p.name + "', found '" + name + "'");
    const auto rank = r.u32();
    Shape shape;
    for (std::uint32_t i = 0; i < rank && i < 8; ++i) shape.push_back(r.u32());
    if (rank >= 8 || shape != p.value.shape()) {
      throw CheckpointMismatch(what + ": parameter '" + name + "' has shape " + shape_to_string(shape) +
                               ", expected " + shape_to_string(p.value.shape()));
    }
    std::vector<double> values(p.value.numel());
    for (auto& v : values) v = r.f32();
    snap.params.push_back(std::move(values));
  }
  return snap;
}

void write_f64_tensors(ByteWriter& w, const std::vector<std::vector<double>>& tensors) {
  w.u32(static_cast<std::uint32_t>(tensors.size()));
  for (const auto& t : tensors) {
    w.u64(t.size());
    for (double v : t) w.f64(v);
  }
}

std::vector<std::vector<double>> read_f64_tensors(ByteReader& r) {
  const auto n = r.u32();
  std::vector<std::vector<double>> out;
  for (std::uint32_t i = 0; i < n; ++i) {
    const auto len = r.u64();
    if (len > r.remaining() / 8) throw TruncationError("train state: tensor length exceeds file size");
    std::vector<double> t(len);
    for (auto& v : t) v = r.f64();
    out.push_back(std::move(t));
  }
  return out;
}

template <typename Fn>
auto with_path_context(const std::filesystem::path& path, Fn fn) {
  try {
    return fn();
  } catch (const TruncationError& e) {
    throw TruncationError("'" + path.string() + "': " + e.what());
  } catch (const CorruptionError& e) {
    throw CorruptionError("'" + path.string() + "': " + e.what());
  } catch (const FormatError& e) {
    throw FormatError("'" + path.string() + "': " + e.what());
  } catch (const CheckpointMismatch& e) {
    throw CheckpointMismatch("'" + path.string() + "': " + e.what());
  }
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Snapshot& snap) {
  ByteWriter w;
  w.begin_container(kCheckpointMagic, kCheckpointFormatVersion);
  write_snapshot_body(w, snap);
  w.end_container();
  return w.take();
}

Snapshot decode_checkpoint(std::span<const std::uint8_t> bytes) {
  const std::string what = "checkpoint";
  ByteReader r(open_container(bytes, kCheckpointMagic, kCheckpointFormatVersion, what), what);
  Snapshot snap = read_snapshot_body(r, what);
  if (r.remaining() != 0) throw FormatError(what + ": trailing bytes");
  return snap;
}

void save_checkpoint(const Snapshot& snap, const std::filesystem::path& path) {
  write_file(path, encode_checkpoint(snap));
}

Snapshot load_checkpoint(const std::filesystem::path& path) {
  return with_path_context(path, [&] { return decode_checkpoint(read_file(path)); });
}

Snapshot load_checkpoint(const std::filesystem::path& path, const ModelConfig& expected) {
  Snapshot snap = load_checkpoint(path);
  if (snap.config.digest() != expected.digest()) {
    throw CheckpointMismatch("'" + path.string() + "': architecture digest " + std::to_string(snap.config.digest()) +
                             " does not match the active model config (" + std::to_string(expected.digest()) + ")");
  }
  return snap;
}

std::vector<std::uint8_t> encode_train_state(const TrainState& st) {
  ByteWriter w;
  w.begin_container(kStateMagic, kStateFormatVersion);
  w.u64(st.next_epoch);
  w.u64(st.rng_state);
  write_f64_tensors(w, st.params);
  w.u64(st.optimizer.step);
  write_f64_tensors(w, st.optimizer.m);
  write_f64_tensors(w, st.optimizer.v);
  w.u32(static_cast<std::uint32_t>(st.log.size()));
  for (const auto& e : st.log) {
    w.u64(e.epoch);
    w.u64(e.cycle);
    for (double v : {e.lr, e.train_loss, e.val_min_ade, e.val_min_fde, e.val_mr}) w.f64(v);
  }
  w.u32(static_cast<std::uint32_t>(st.snapshots.size()));
  for (const auto& s : st.snapshots) {
    const auto blob = encode_checkpoint(s);
    w.u64(blob.size());
    w.raw(blob);
  }
  w.end_container();
  return w.take();
}

TrainState decode_train_state(std::span<const std::uint8_t> bytes) {
  const std::string what = "train state";
  ByteReader r(open_container(bytes, kStateMagic, kStateFormatVersion, what), what);
  {
    TrainState st;
    st.next_epoch = r.u64();
    st.rng_state = r.u64();
    st.params = read_f64_tensors(r);
    st.optimizer.step = r.u64();
    st.optimizer.m = read_f64_tensors(r);
    st.optimizer.v = read_f64_tensors(r);
    const auto n_log = r.u32();
    for (std::uint32_t i = 0; i < n_log; ++i) {
      EpochRecord e;
      e.epoch = r.u64();
      e.cycle = r.u64();
      e.lr = r.f64();
      e.train_loss = r.f64();
      e.val_min_ade = r.f64();
      e.val_min_fde = r.f64();
      e.val_mr = r.f64();
      st.log.push_back(e);
    }
    const auto n_snap = r.u32();
    for (std::uint32_t i = 0; i < n_snap; ++i) {
      const auto len = r.u64();
      st.snapshots.push_back(decode_checkpoint(r.raw(len)));
    }
    if (r.remaining() != 0) throw FormatError(what + ": trailing bytes");
    return st;
  }
}

void save_train_state(const TrainState& st, const std::filesystem::path& path) {
  write_file(path, encode_train_state(st));
}

TrainState load_train_state(const std::filesystem::path& path) {
  return with_path_context(path, [&] { return decode_train_state(read_file(path)); });
}

}  // namespace dyttp
