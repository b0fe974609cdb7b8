#include "dyttp/layers.hpp"

#include <cmath>

namespace dyttp {

std::string_view to_string(NormKind kind) { return kind == NormKind::dyt ? "dyt" : "layernorm"; }

NormKind parse_norm_kind(std::string_view text) {
  if (text == "dyt" || text == "DyT") return NormKind::dyt;
  if (text == "layernorm" || text == "LayerNorm" || text == "ln") return NormKind::layernorm;
  throw Error("unknown norm kind '" + std::string(text) + "' (expected dyt or layernorm)");
}

DyTParams DyTParams::init(std::size_t channels, double alpha0) {
  return DyTParams{Tensor::full({1}, alpha0, true), Tensor::ones({channels}, true), Tensor::zeros({channels}, true)};
}

Tensor dyt_forward(const Tensor& x, const DyTParams& p) {
  if (x.dim() == 0 || x.shape().back() != p.channels()) {
    throw ShapeError("DyT expects last dim " + std::to_string(p.channels()) + ", got " + shape_to_string(x.shape()));
  }
  if (p.alpha.numel() != 1 || p.beta.numel() != p.channels()) throw ShapeError("malformed DyT parameters");
  // Purely elementwise: no statistics across channels or tokens.
  return add(mul(tanh(mul(x, p.alpha)), p.gamma), p.beta);
}

LayerNormParams LayerNormParams::init(std::size_t channels, double epsilon) {
  if (!(epsilon > 0.0)) throw DomainError("LayerNorm epsilon must be positive");
  return LayerNormParams{Tensor::ones({channels}, true), Tensor::zeros({channels}, true), epsilon};
}

Tensor layernorm_forward(const Tensor& x, const LayerNormParams& p) {
  if (x.dim() == 0 || x.shape().back() != p.channels()) {
    throw ShapeError("LayerNorm expects last dim " + std::to_string(p.channels()) + ", got " +
                     shape_to_string(x.shape()));
  }
  const std::size_t axis = x.dim() - 1;
  const Tensor centered = sub(x, mean(x, axis, true));
  const Tensor variance = mean(mul(centered, centered), axis, true);
  const Tensor normed = div(centered, sqrt(add_scalar(variance, p.epsilon)));
  return add(mul(normed, p.gamma), p.beta);
}

Norm::Norm(NormKind kind, std::size_t channels)
    : kind_(kind), dyt_(DyTParams::init(channels)), layernorm_(LayerNormParams::init(channels)) {}

Tensor Norm::forward(const Tensor& x) const {
  return kind_ == NormKind::dyt ? dyt_forward(x, dyt_) : layernorm_forward(x, layernorm_);
}

void Norm::collect(ParamList& out, const std::string& prefix) const {
  if (kind_ == NormKind::dyt) {
    out.push_back({prefix + ".alpha", dyt_.alpha});
    out.push_back({prefix + ".gamma", dyt_.gamma});
    out.push_back({prefix + ".beta", dyt_.beta});
  } else {
    out.push_back({prefix + ".gamma", layernorm_.gamma});
    out.push_back({prefix + ".beta", layernorm_.beta});
  }
}

Linear Linear::init(std::size_t in, std::size_t out, Rng& rng, bool with_bias) {
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  std::vector<double> w(in * out);
  for (auto& v : w) v = rng.uniform(-limit, limit);
  Linear layer;
  layer.weight = Tensor({in, out}, std::move(w), true);
  layer.has_bias = with_bias;
  layer.bias = with_bias ? Tensor::zeros({out}, true) : Tensor(Shape{0}, {});
  return layer;
}

Tensor Linear::forward(const Tensor& x) const {
  Tensor y = matmul(x, weight);
  return has_bias ? add(y, bias) : y;
}

void Linear::collect(ParamList& out, const std::string& prefix) const {
  out.push_back({prefix + ".weight", weight});
  if (has_bias) out.push_back({prefix + ".bias", bias});
}

void Linear::zero() {
  for (auto& v : weight.data_mut()) v = 0.0;
  if (has_bias) {
    for (auto& v : bias.data_mut()) v = 0.0;
  }
}

AttentionParams AttentionParams::init(std::size_t width, std::size_t heads, Rng& rng) {
  if (heads == 0 || width % heads != 0) {
    throw ShapeError("attention width " + std::to_string(width) + " not divisible by " + std::to_string(heads) + " heads");
  }
  AttentionParams p;
  p.query = Linear::init(width, width, rng);
  p.key = Linear::init(width, width, rng);
  p.value = Linear::init(width, width, rng);
  p.output = Linear::init(width, width, rng);
  p.heads = heads;
  p.width = width;
  return p;
}

void AttentionParams::collect(ParamList& out, const std::string& prefix) const {
  query.collect(out, prefix + ".query");
  key.collect(out, prefix + ".key");
  value.collect(out, prefix + ".value");
  output.collect(out, prefix + ".output");
}

namespace {

// [B, T, D] -> [B, H, T, D/H]
Tensor split_heads(const Tensor& x, std::size_t heads) {
  const auto b = x.shape()[0];
  const auto t = x.shape()[1];
  const auto d = x.shape()[2];
  return transpose(reshape(x, {b, t, heads, d / heads}), 1, 2);
}

}  // namespace

Tensor mha_forward(const Tensor& q_in, const Tensor& kv_in, const AttentionMask* mask, const AttentionParams& p,
                   const ForwardContext& ctx, double dropout_p) {
  if (q_in.dim() != 3 || kv_in.dim() != 3) throw ShapeError("attention inputs must be [B, T, D]");
  const auto batch = q_in.shape()[0];
  const auto tq = q_in.shape()[1];
  const auto tk = kv_in.shape()[1];
  if (kv_in.shape()[0] != batch || q_in.shape()[2] != p.width || kv_in.shape()[2] != p.width) {
    throw ShapeError("attention input shapes " + shape_to_string(q_in.shape()) + " / " +
                     shape_to_string(kv_in.shape()) + " do not match width " + std::to_string(p.width));
  }
  const auto heads = p.heads;
  const auto head_dim = p.width / heads;

  const Tensor q = split_heads(p.query.forward(q_in), heads);
  const Tensor k = split_heads(p.key.forward(kv_in), heads);
  const Tensor v = split_heads(p.value.forward(kv_in), heads);
  const Tensor scores = scale(matmul(q, transpose(k, 2, 3)), 1.0 / std::sqrt(static_cast<double>(head_dim)));

  Tensor weights;
  if (mask != nullptr) {
    if (mask->size() != batch * tq * tk) {
      throw ShapeError("attention mask has " + std::to_string(mask->size()) + " entries, expected " +
                       std::to_string(batch * tq * tk));
    }
    std::vector<std::uint8_t> expanded(batch * heads * tq * tk);
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t h = 0; h < heads; ++h)
        for (std::size_t i = 0; i < tq * tk; ++i) expanded[(b * heads + h) * tq * tk + i] = (*mask)[b * tq * tk + i];
    weights = masked_softmax(scores, expanded);
  } else {
    weights = softmax(scores, 3);
  }
  if (ctx.training && dropout_p > 0.0) weights = dropout(weights, dropout_p, *ctx.rng);

  const Tensor mixed = transpose(matmul(weights, v), 1, 2);  // [B, Tq, H, dh]
  return p.output.forward(reshape(mixed, {batch, tq, p.width}));
}

void BlockConfig::validate() const {
  if (width == 0 || heads == 0 || width % heads != 0) {
    throw ShapeError("block width " + std::to_string(width) + " must be a positive multiple of heads " +
                     std::to_string(heads));
  }
  if (ffn_ratio == 0) throw ShapeError("feed-forward ratio must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw DomainError("dropout must lie in [0, 1)");
}

TransformerBlock::TransformerBlock(const BlockConfig& cfg, Rng& rng, bool cross_attention)
    : cfg_((cfg.validate(), cfg)),
      cross_(cross_attention),
      norm_query_(cfg.norm_kind, cfg.width),
      attention_(AttentionParams::init(cfg.width, cfg.heads, rng)),
      norm_ffn_(cfg.norm_kind, cfg.width),
      ffn_up_(Linear::init(cfg.width, cfg.width * cfg.ffn_ratio, rng)),
      ffn_down_(Linear::init(cfg.width * cfg.ffn_ratio, cfg.width, rng)) {
  if (cross_) norm_context_.emplace(cfg.norm_kind, cfg.width);
}

Tensor TransformerBlock::feed_forward(const Tensor& x, const ForwardContext& ctx) const {
  Tensor hidden = relu(ffn_up_.forward(norm_ffn_.forward(x)));
  if (ctx.training && cfg_.dropout > 0.0) hidden = dropout(hidden, cfg_.dropout, *ctx.rng);
  return add(x, ffn_down_.forward(hidden));
}

Tensor TransformerBlock::forward(const Tensor& x, const AttentionMask* mask, const ForwardContext& ctx) const {
  if (cross_) throw Error("cross-attention block called without context");
  const Tensor normed = norm_query_.forward(x);
  const Tensor attended = add(x, mha_forward(normed, normed, mask, attention_, ctx, cfg_.dropout));
  return feed_forward(attended, ctx);
}

Tensor TransformerBlock::forward_cross(const Tensor& x, const Tensor& context, const AttentionMask* mask,
                                       const ForwardContext& ctx) const {
  if (!cross_) throw Error("self-attention block called with a context");
  const Tensor q = norm_query_.forward(x);
  const Tensor kv = norm_context_->forward(context);
  const Tensor attended = add(x, mha_forward(q, kv, mask, attention_, ctx, cfg_.dropout));
  return feed_forward(attended, ctx);
}

void TransformerBlock::collect(ParamList& out, const std::string& prefix) const {
  norm_query_.collect(out, prefix + ".norm_query");
  if (norm_context_) norm_context_->collect(out, prefix + ".norm_context");
  attention_.collect(out, prefix + ".attention");
  norm_ffn_.collect(out, prefix + ".norm_ffn");
  ffn_up_.collect(out, prefix + ".ffn_up");
  ffn_down_.collect(out, prefix + ".ffn_down");
}

void TransformerBlock::zero_output_projections() {
  attention_.output.zero();
  ffn_down_.zero();
}

}  // namespace dyttp
