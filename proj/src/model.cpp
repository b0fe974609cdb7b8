#include "dyttp/model.hpp"

#include <cmath>

#include "dyttp/bytes.hpp"
#include "dyttp/error.hpp"

namespace dyttp {

void ModelConfig::validate() const {
  block().validate();
  if (blocks_per_stage == 0) throw Error("blocks_per_stage must be >= 1");
  if (modes == 0) throw Error("modes (K) must be >= 1");
  if (obs_len < 2 || pred_len < 1) throw Error("model horizons need obs_len >= 2 and pred_len >= 1");
  if (!(radius > 0.0)) throw DomainError("attention radius must be positive");
  if (!(position_scale > 0.0 && offset_scale > 0.0)) throw DomainError("position/offset scales must be positive");
  if (!(min_scale >= 0.0)) throw DomainError("min_scale must be >= 0");
}

BlockConfig ModelConfig::block() const {
  BlockConfig b;
  b.norm_kind = norm_kind;
  b.width = width;
  b.heads = heads;
  b.ffn_ratio = ffn_ratio;
  b.dropout = dropout;
  return b;
}

std::uint64_t ModelConfig::digest() const {
  ByteWriter w;
  w.raw("dyttp-model-v1");
  for (std::size_t v : {width, heads, blocks_per_stage, modes, obs_len, pred_len, ffn_ratio}) w.u64(v);
  for (double v : {radius, position_scale, offset_scale, min_scale}) w.f64(v);
  w.raw(to_string(norm_kind));
  return fnv1a64(w.bytes());
}

Vec2 PredictionSet::location(std::size_t k, std::size_t t) const {
  const auto d = locations.data();
  const std::size_t f = horizon();
  return {d[(k * f + t) * 2], d[(k * f + t) * 2 + 1]};
}

PredictionSet ModelOutput::agent(std::size_t i) const {
  const std::size_t k = probs.shape()[1];
  const std::size_t f = locations.shape()[2];
  const std::size_t span = k * f * 2;
  const auto take = [&](const Tensor& t, std::size_t len, Shape shape) {
    const auto d = t.data();
    return Tensor(std::move(shape), std::vector<double>(d.begin() + static_cast<std::ptrdiff_t>(i * len),
                                                        d.begin() + static_cast<std::ptrdiff_t>((i + 1) * len)));
  };
  return PredictionSet{take(locations, span, {k, f, 2}), take(scales, span, {k, f, 2}), take(probs, k, {k})};
}

std::vector<Vec2> agent_origins(const Scenario& s) {
  std::vector<Vec2> out(s.num_agents);
  Vec2 focal_origin;
  s.last_observed(s.focal, focal_origin);
  for (std::size_t a = 0; a < s.num_agents; ++a) {
    if (!s.last_observed(a, out[a])) out[a] = focal_origin;
  }
  return out;
}

namespace {

std::vector<TransformerBlock> make_stage(const ModelConfig& cfg, Rng& rng, bool cross) {
  std::vector<TransformerBlock> blocks;
  for (std::size_t i = 0; i < cfg.blocks_per_stage; ++i) blocks.emplace_back(cfg.block(), rng, cross);
  return blocks;
}

Tensor step_embedding_init(std::size_t steps, std::size_t width, Rng& rng) {
  std::vector<double> v(steps * width);
  for (auto& x : v) x = rng.normal(0.0, 0.1);
  return Tensor({steps, width}, std::move(v), true);
}

void collect_stage(const std::vector<TransformerBlock>& blocks, ParamList& out, const std::string& name) {
  for (std::size_t i = 0; i < blocks.size(); ++i) blocks[i].collect(out, name + "." + std::to_string(i));
}

}  // namespace

Model::Model(const ModelConfig& cfg, std::uint64_t init_seed)
    : cfg_((cfg.validate(), cfg)), final_norm_(cfg.norm_kind, cfg.width) {
  Rng rng(init_seed);
  const std::size_t d = cfg.width;
  agent_embed_ = Linear::init(2, d, rng, false);
  step_embed_ = step_embedding_init(cfg.obs_len, d, rng);
  lane_embed_ = Linear::init(2, d, rng);
  rel_embed_ = Linear::init(2, d, rng);
  lane_pos_embed_ = Linear::init(2, d, rng);
  agent_agent_ = make_stage(cfg, rng, true);
  temporal_ = make_stage(cfg, rng, false);
  agent_lane_ = make_stage(cfg, rng, true);
  global_ = make_stage(cfg, rng, false);
  head_hidden_ = Linear::init(d, 2 * d, rng);
  head_location_ = Linear::init(2 * d, cfg.modes * cfg.pred_len * 2, rng);
  head_scale_ = Linear::init(2 * d, cfg.modes * cfg.pred_len * 2, rng);
  head_logits_ = Linear::init(2 * d, cfg.modes, rng);
}

Model Model::clone() const {
  Model m(cfg_, 0);
  m.load_values(values());
  return m;
}

ParamList Model::named_parameters() const {
  ParamList out;
  agent_embed_.collect(out, "embed.agent");
  out.push_back({"embed.step", step_embed_});
  lane_embed_.collect(out, "embed.lane");
  rel_embed_.collect(out, "embed.relative");
  lane_pos_embed_.collect(out, "embed.lane_position");
  collect_stage(agent_agent_, out, "agent_agent");
  collect_stage(temporal_, out, "temporal");
  collect_stage(agent_lane_, out, "agent_lane");
  collect_stage(global_, out, "global");
  final_norm_.collect(out, "final_norm");
  head_hidden_.collect(out, "head.hidden");
  head_location_.collect(out, "head.location");
  head_scale_.collect(out, "head.scale");
  head_logits_.collect(out, "head.logits");
  return out;
}

std::size_t Model::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : named_parameters()) n += p.value.numel();
  return n;
}

void Model::load_values(const std::vector<std::vector<double>>& values) {
  auto params = named_parameters();
  if (values.size() != params.size()) {
    throw CheckpointMismatch("expected " + std::to_string(params.size()) + " parameter tensors, got " +
                             std::to_string(values.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto dst = params[i].value.data_mut();
    if (values[i].size() != dst.size()) {
      throw CheckpointMismatch("parameter '" + params[i].name + "' has " + std::to_string(dst.size()) +
                               " values, got " + std::to_string(values[i].size()));
    }
    std::copy(values[i].begin(), values[i].end(), dst.begin());
  }
}

std::vector<std::vector<double>> Model::values() const {
  std::vector<std::vector<double>> out;
  for (const auto& p : named_parameters()) out.push_back(p.value.to_vector());
  return out;
}

void Model::zero_location_head() { head_location_.zero(); }

void Model::check_scenario(const Scenario& s) const {
  if (s.obs_len != cfg_.obs_len || s.pred_len != cfg_.pred_len) {
    throw ShapeError("scenario '" + s.id + "' has horizons " + std::to_string(s.obs_len) + "/" +
                     std::to_string(s.pred_len) + ", model expects " + std::to_string(cfg_.obs_len) + "/" +
                     std::to_string(cfg_.pred_len));
  }
  if (s.num_agents == 0) throw ShapeError("scenario '" + s.id + "' has no agents");
}

EmbeddedInputs Model::embed(const Scenario& s) const {
  check_scenario(s);
  const std::size_t n = s.num_agents;
  const std::size_t t_len = s.obs_len;
  const std::size_t d = cfg_.width;
  std::vector<double> disp(n * t_len * 2, 0.0);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t t = 1; t < t_len; ++t) {
      if (!s.hist_valid(a, t) || !s.hist_valid(a, t - 1)) continue;
      const Vec2 v = s.hist(a, t) - s.hist(a, t - 1);
      disp[(a * t_len + t) * 2] = v.x;
      disp[(a * t_len + t) * 2 + 1] = v.y;
    }
  }
  EmbeddedInputs out;
  out.agent_tokens = add(agent_embed_.forward(Tensor({n, t_len, 2}, std::move(disp))), step_embed_);

  std::vector<double> dirs;
  for (const auto& lane : s.lanes) {
    for (std::size_t i = 1; i < lane.points.size(); ++i) {
      const Vec2 a = lane.points[i - 1];
      const Vec2 b = lane.points[i];
      const Vec2 v = (1.0 / cfg_.position_scale) * (b - a);
      dirs.push_back(v.x);
      dirs.push_back(v.y);
      out.segment_mids.push_back(0.5 * (a + b));
    }
  }
  const std::size_t m = out.segment_mids.size();
  out.lane_tokens = m == 0 ? Tensor::zeros({0, d}) : lane_embed_.forward(Tensor({m, 2}, std::move(dirs)));
  return out;
}

EncodedScene Model::encode(const Scenario& s, const ForwardContext& ctx, EncodeTrace* trace) const {
  const EmbeddedInputs in = embed(s);
  const std::size_t n = s.num_agents;
  const std::size_t t_len = s.obs_len;
  const std::size_t d = cfg_.width;
  const double r = cfg_.radius;
  const double inv_scale = 1.0 / cfg_.position_scale;
  EncodedScene enc;
  enc.origins = agent_origins(s);

  // (a) agent-agent attention per observed step; query (i, t) sees agents j
  // at step t within the radius, keyed by their position relative to i.
  Tensor x = in.agent_tokens;
  {
    std::vector<double> rel(n * t_len * n * 2, 0.0);
    AttentionMask mask(n * t_len * n, 0);
    std::vector<std::size_t> gather(n * t_len * n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t t = 0; t < t_len; ++t) {
        const std::size_t row = i * t_len + t;
        for (std::size_t j = 0; j < n; ++j) {
          const std::size_t e = row * n + j;
          gather[e] = j * t_len + t;
          if (j == i) {
            mask[e] = 1;
            continue;
          }
          if (!s.hist_valid(i, t) || !s.hist_valid(j, t)) continue;
          const Vec2 dp = s.hist(j, t) - s.hist(i, t);
          if (dp.norm() > r) continue;
          mask[e] = 1;
          rel[e * 2] = dp.x * inv_scale;
          rel[e * 2 + 1] = dp.y * inv_scale;
        }
      }
    }
    const Tensor rel_tokens = rel_embed_.forward(Tensor({n * t_len * n, 2}, std::move(rel)));
    for (const auto& block : agent_agent_) {
      const Tensor flat = reshape(x, {n * t_len, d});
      const Tensor kv = reshape(add(index_select(flat, 0, gather), rel_tokens), {n * t_len, n, d});
      x = reshape(block.forward_cross(reshape(flat, {n * t_len, 1, d}), kv, &mask, ctx), {n, t_len, d});
    }
  }
  if (trace != nullptr) trace->agent_agent = x;

  // (b) causal temporal attention per agent over its own observed steps.
  {
    AttentionMask mask(n * t_len * t_len, 0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t q = 0; q < t_len; ++q)
        for (std::size_t k = 0; k <= q; ++k)
          mask[(i * t_len + q) * t_len + k] = (k == q || s.hist_valid(i, k)) ? 1 : 0;
    for (const auto& block : temporal_) x = block.forward(x, &mask, ctx);
  }
  Tensor summary = reshape(slice(x, 1, t_len - 1, 1), {n, d});
  if (trace != nullptr) trace->temporal = summary;

  // (c) agent-lane cross attention; keys are the agent itself plus the lane
  // segments within the radius of its origin.
  {
    std::vector<std::size_t> kept;
    for (std::size_t m = 0; m < in.segment_mids.size(); ++m) {
      for (std::size_t i = 0; i < n; ++i) {
        if (distance(in.segment_mids[m], enc.origins[i]) <= r) {
          kept.push_back(m);
          break;
        }
      }
    }
    const std::size_t mk = kept.size();
    AttentionMask mask(n * (1 + mk), 0);
    std::vector<double> rel(n * mk * 2, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      mask[i * (1 + mk)] = 1;
      for (std::size_t m = 0; m < mk; ++m) {
        const Vec2 dp = in.segment_mids[kept[m]] - enc.origins[i];
        if (dp.norm() > r) continue;
        mask[i * (1 + mk) + 1 + m] = 1;
        rel[(i * mk + m) * 2] = dp.x * inv_scale;
        rel[(i * mk + m) * 2 + 1] = dp.y * inv_scale;
      }
    }
    Tensor lane_kv;
    if (mk > 0) {
      const Tensor lane_pos = reshape(lane_pos_embed_.forward(Tensor({n * mk, 2}, std::move(rel))), {n, mk, d});
      lane_kv = add(lane_pos, index_select(in.lane_tokens, 0, kept));
    }
    for (const auto& block : agent_lane_) {
      const Tensor q = reshape(summary, {n, 1, d});
      const Tensor kv = mk > 0 ? concat(std::vector<Tensor>{q, lane_kv}, 1) : q;
      summary = reshape(block.forward_cross(q, kv, &mask, ctx), {n, d});
    }
  }
  if (trace != nullptr) trace->agent_lane = summary;

  // (d) global attention among all agents, no radius limit.
  Tensor g = reshape(summary, {1, n, d});
  for (const auto& block : global_) g = block.forward(g, nullptr, ctx);
  g = reshape(g, {n, d});
  if (trace != nullptr) trace->global = g;

  enc.embeddings = final_norm_.forward(g);
  return enc;
}

ModelOutput Model::decode(const EncodedScene& enc) const {
  const std::size_t n = enc.origins.size();
  const std::size_t k = cfg_.modes;
  const std::size_t f = cfg_.pred_len;
  if (enc.embeddings.dim() != 2 || enc.embeddings.shape()[0] != n || enc.embeddings.shape()[1] != cfg_.width) {
    throw ShapeError("encoded scene has shape " + shape_to_string(enc.embeddings.shape()));
  }
  std::vector<double> origin(n * 2);
  for (std::size_t i = 0; i < n; ++i) {
    origin[i * 2] = enc.origins[i].x;
    origin[i * 2 + 1] = enc.origins[i].y;
  }
  const Tensor hidden = relu(head_hidden_.forward(enc.embeddings));
  ModelOutput out;
  out.origins = enc.origins;
  const Tensor offsets = reshape(scale(head_location_.forward(hidden), cfg_.offset_scale), {n, k, f, 2});
  out.locations = add(offsets, Tensor({n, 1, 1, 2}, std::move(origin)));
  out.scales = reshape(add_scalar(softplus(head_scale_.forward(hidden)), cfg_.min_scale), {n, k, f, 2});
  out.probs = softmax(head_logits_.forward(hidden), 1);
  return out;
}

ModelOutput Model::forward(const Scenario& s, const ForwardContext& ctx) const { return decode(encode(s, ctx)); }

std::vector<PredictionSet> Model::predict(const Scenario& s) const {
  Tape::Pause pause;
  const ModelOutput out = forward(s);
  std::vector<PredictionSet> preds;
  preds.reserve(out.agents());
  for (std::size_t i = 0; i < out.agents(); ++i) preds.push_back(out.agent(i));
  return preds;
}

}  // namespace dyttp
