#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dyttp/ops.hpp"
#include "dyttp/rng.hpp"
#include "dyttp/tensor.hpp"

namespace dyttp {

enum class NormKind { dyt, layernorm };

std::string_view to_string(NormKind kind);
NormKind parse_norm_kind(std::string_view text);

struct NamedParam {
  std::string name;
  Tensor value;
};
using ParamList = std::vector<NamedParam>;

/// Training switches for a forward pass. `rng` is required when training with
/// nonzero dropout.
struct ForwardContext {
  bool training = false;
  Rng* rng = nullptr;
};

// ---------------------------------------------------------------------------
// Normalization

/// DyT(x) = gamma * tanh(alpha * x) + beta, with one scalar alpha and
/// per-channel gamma/beta.
struct DyTParams {
  Tensor alpha;  // shape [1]
  Tensor gamma;  // shape [C]
  Tensor beta;   // shape [C]

  static DyTParams init(std::size_t channels, double alpha0 = 0.5);
  std::size_t channels() const { return gamma.numel(); }
};

Tensor dyt_forward(const Tensor& x, const DyTParams& p);

struct LayerNormParams {
  Tensor gamma;
  Tensor beta;
  double epsilon = 1e-5;

  static LayerNormParams init(std::size_t channels, double epsilon = 1e-5);
  std::size_t channels() const { return gamma.numel(); }
};

/// Standardizes over the last axis with the population variance, then
/// applies the affine map.
Tensor layernorm_forward(const Tensor& x, const LayerNormParams& p);

/// A normalization site that is either DyT or LayerNorm.
class Norm {
 public:
  Norm(NormKind kind, std::size_t channels);

  Tensor forward(const Tensor& x) const;
  NormKind kind() const { return kind_; }
  void collect(ParamList& out, const std::string& prefix) const;

  DyTParams& dyt() { return dyt_; }
  LayerNormParams& layernorm() { return layernorm_; }

 private:
  NormKind kind_;
  DyTParams dyt_;
  LayerNormParams layernorm_;
};

// ---------------------------------------------------------------------------
// Dense layers

struct Linear {
  Tensor weight;  // [in, out]
  Tensor bias;    // [out]; empty (numel 0) when the layer has no bias
  bool has_bias = true;

  static Linear init(std::size_t in, std::size_t out, Rng& rng, bool with_bias = true);
  Tensor forward(const Tensor& x) const;
  void collect(ParamList& out, const std::string& prefix) const;
  void zero();
};

struct AttentionParams {
  Linear query;
  Linear key;
  Linear value;
  Linear output;
  std::size_t heads = 1;
  std::size_t width = 0;

  static AttentionParams init(std::size_t width, std::size_t heads, Rng& rng);
  void collect(ParamList& out, const std::string& prefix) const;
};

/// Allow-mask for attention of shape [B, Tq, Tk]: nonzero = may attend.
using AttentionMask = std::vector<std::uint8_t>;

/// Scaled dot-product multi-head attention. q_in is [B, Tq, D], kv_in is
/// [B, Tk, D]; returns [B, Tq, D]. Blocked scores get zero weight; a query
/// row with nothing to attend to is a DomainError.
Tensor mha_forward(const Tensor& q_in, const Tensor& kv_in, const AttentionMask* mask, const AttentionParams& p,
                   const ForwardContext& ctx = {}, double dropout_p = 0.0);

struct BlockConfig {
  NormKind norm_kind = NormKind::dyt;
  std::size_t width = 32;
  std::size_t heads = 4;
  std::size_t ffn_ratio = 2;
  double dropout = 0.0;

  void validate() const;
};

/// Pre-norm transformer block:
///   x = x + MHA(Norm(x), Norm(context))
///   x = x + FFN(Norm(x))
/// Self-attention uses x as its own context (and one shared norm).
class TransformerBlock {
 public:
  TransformerBlock(const BlockConfig& cfg, Rng& rng, bool cross_attention = false);

  Tensor forward(const Tensor& x, const AttentionMask* mask, const ForwardContext& ctx = {}) const;
  Tensor forward_cross(const Tensor& x, const Tensor& context, const AttentionMask* mask,
                       const ForwardContext& ctx = {}) const;

  void collect(ParamList& out, const std::string& prefix) const;
  /// Zeroes both residual-branch output projections, making the block the identity.
  void zero_output_projections();

  const BlockConfig& config() const { return cfg_; }
  AttentionParams& attention() { return attention_; }

 private:
  Tensor feed_forward(const Tensor& x, const ForwardContext& ctx) const;

  BlockConfig cfg_;
  bool cross_;
  Norm norm_query_;
  std::optional<Norm> norm_context_;
  AttentionParams attention_;
  Norm norm_ffn_;
  Linear ffn_up_;
  Linear ffn_down_;
};

}  // namespace dyttp
