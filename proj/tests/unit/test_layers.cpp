#include <cmath>

#include "doctest.h"
#include "dyttp/grad_check.hpp"
#include "dyttp/layers.hpp"
#include "helpers.hpp"

using namespace dyttp;
using dyttp::test::random_tensor;

namespace {

// Reference values from tests/oracles/oracles.py.
constexpr double kTanhOne = 0.7615941559557649;
constexpr double kLayerNormTwoPoint = 0.9999950000374996;

Tensor weighted_sum(const Tensor& y, std::uint64_t seed) {
  Rng rng(seed);
  return sum_all(mul(y, random_tensor(y.shape(), rng)));
}

}  // namespace

TEST_CASE("DyT examples") {
  DyTParams p = DyTParams::init(3, 0.5);
  const Tensor z = dyt_forward(Tensor::zeros({2, 3}), p);
  for (double v : z.data()) CHECK(v == 0.0);

  DyTParams s = DyTParams::init(1, 0.5);
  s.gamma = Tensor::vector({2.0}, true);
  s.beta = Tensor::vector({1.0}, true);
  CHECK(dyt_forward(Tensor::vector({1e6}), s).item() == 3.0);

  DyTParams u = DyTParams::init(1, 1.0);
  CHECK(std::fabs(dyt_forward(Tensor::vector({1.0}), u).item() - kTanhOne) <= 1e-12);
  CHECK_THROWS_AS(dyt_forward(Tensor::zeros({2, 4}), p), ShapeError);
}

TEST_CASE("DyT is bounded and equals beta at zero") {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    DyTParams p = DyTParams::init(6, rng.uniform(-3.0, 3.0));
    p.gamma = random_tensor({6}, rng, -4.0, 4.0, true);
    p.beta = random_tensor({6}, rng, -4.0, 4.0, true);
    const Tensor x = random_tensor({5, 6}, rng, -1e4, 1e4);
    const Tensor y = dyt_forward(x, p);
    for (std::size_t i = 0; i < y.numel(); ++i) {
      const std::size_t c = i % 6;
      CHECK(std::fabs(y.data()[i]) <= std::fabs(p.gamma.data()[c]) + std::fabs(p.beta.data()[c]));
    }
    const Tensor at_zero = dyt_forward(Tensor::zeros({1, 6}), p);
    CHECK(test::bit_equal(at_zero.data(), p.beta.data()));
  }
}

TEST_CASE("DyT is elementwise") {
  Rng rng(12);
  DyTParams p = DyTParams::init(4, 0.7);
  p.gamma = random_tensor({4}, rng, -2.0, 2.0, true);
  const Tensor x = random_tensor({3, 4}, rng);
  const Tensor y = dyt_forward(x, p);
  std::vector<double> changed = x.to_vector();
  changed[5] += 10.0;
  const Tensor y2 = dyt_forward(Tensor(x.shape(), changed), p);
  for (std::size_t i = 0; i < y.numel(); ++i) {
    if (i != 5) CHECK(y.data()[i] == y2.data()[i]);
  }
  CHECK(y.data()[5] != y2.data()[5]);
}

TEST_CASE("LayerNorm examples") {
  const LayerNormParams p = LayerNormParams::init(3);
  const Tensor flat = layernorm_forward(Tensor::full({2, 3}, 7.5), p);
  for (double v : flat.data()) CHECK(v == 0.0);

  const LayerNormParams two = LayerNormParams::init(2);
  const Tensor y = layernorm_forward(Tensor::vector({1.0, 3.0}), two);
  CHECK(std::fabs(y.data()[0] + kLayerNormTwoPoint) <= 1e-15);
  CHECK(std::fabs(y.data()[1] - kLayerNormTwoPoint) <= 1e-15);
  const LayerNormParams tiny = LayerNormParams::init(2, 1e-300);
  const Tensor exact = layernorm_forward(Tensor::vector({1.0, 3.0}), tiny);
  CHECK(exact.data()[0] == -1.0);
  CHECK(exact.data()[1] == 1.0);
  CHECK_THROWS_AS(LayerNormParams::init(2, 0.0), DomainError);
}

TEST_CASE("LayerNorm standardizes each position") {
  Rng rng(13);
  const LayerNormParams p = LayerNormParams::init(16, 1e-14);
  const Tensor y = layernorm_forward(random_tensor({10, 16}, rng, -5.0, 5.0), p);
  for (std::size_t r = 0; r < 10; ++r) {
    double m = 0.0;
    double v = 0.0;
    for (std::size_t c = 0; c < 16; ++c) m += y.data()[r * 16 + c];
    m /= 16.0;
    for (std::size_t c = 0; c < 16; ++c) v += (y.data()[r * 16 + c] - m) * (y.data()[r * 16 + c] - m);
    v /= 16.0;
    CHECK(std::fabs(m) < 1e-10);
    CHECK(std::fabs(v - 1.0) < 1e-10);
  }
}

TEST_CASE("Norm sites are interchangeable") {
  Rng rng(14);
  const Tensor x = random_tensor({2, 5, 8}, rng);
  const Norm d(NormKind::dyt, 8);
  const Norm l(NormKind::layernorm, 8);
  CHECK(d.forward(x).shape() == l.forward(x).shape());
  ParamList pd;
  ParamList pl;
  d.collect(pd, "n");
  l.collect(pl, "n");
  CHECK(pd.size() == 3);
  CHECK(pl.size() == 2);
  CHECK(parse_norm_kind("layernorm") == NormKind::layernorm);
  CHECK(parse_norm_kind(to_string(NormKind::dyt)) == NormKind::dyt);
  CHECK_THROWS(parse_norm_kind("batchnorm"));
}

TEST_CASE("attention over one token is the value-output projection") {
  Rng rng(15);
  const AttentionParams p = AttentionParams::init(4, 2, rng);
  const Tensor q = random_tensor({1, 1, 4}, rng);
  const Tensor kv = random_tensor({1, 1, 4}, rng);
  const Tensor y = mha_forward(q, kv, nullptr, p);
  const Tensor expect = p.output.forward(p.value.forward(kv));
  for (std::size_t i = 0; i < 4; ++i) CHECK(y.data()[i] == doctest::Approx(expect.data()[i]).epsilon(1e-14));
}

TEST_CASE("attention with identical tokens gives identical outputs") {
  Rng rng(16);
  const AttentionParams p = AttentionParams::init(4, 2, rng);
  std::vector<double> tok{0.3, -0.2, 0.9, 0.1};
  std::vector<double> rep;
  for (int i = 0; i < 3; ++i) rep.insert(rep.end(), tok.begin(), tok.end());
  const Tensor x({1, 3, 4}, rep);
  const Tensor y = mha_forward(x, x, nullptr, p);
  for (std::size_t t = 1; t < 3; ++t) {
    for (std::size_t c = 0; c < 4; ++c) CHECK(y.data()[t * 4 + c] == doctest::Approx(y.data()[c]).epsilon(1e-14));
  }
}

TEST_CASE("attention hand calculation, 2 tokens, 1 head, identity projections") {
  Rng rng(17);
  AttentionParams p = AttentionParams::init(2, 1, rng);
  for (Linear* l : {&p.query, &p.key, &p.value, &p.output}) {
    l->weight = Tensor({2, 2}, {1, 0, 0, 1}, true);
    l->bias = Tensor::zeros({2}, true);
  }
  const Tensor x({1, 2, 2}, {1.0, 0.0, 0.0, 2.0});
  const Tensor y = mha_forward(x, x, nullptr, p);
  // Query 0: scores [1, 0] / sqrt(2); query 1: scores [0, 4] / sqrt(2).
  const double r = 1.0 / std::sqrt(2.0);
  const double w00 = std::exp(r) / (std::exp(r) + 1.0);
  const double w11 = std::exp(4.0 * r) / (1.0 + std::exp(4.0 * r));
  CHECK(y.at({0, 0, 0}) == doctest::Approx(w00).epsilon(1e-14));
  CHECK(y.at({0, 0, 1}) == doctest::Approx((1.0 - w00) * 2.0).epsilon(1e-14));
  CHECK(y.at({0, 1, 0}) == doctest::Approx(1.0 - w11).epsilon(1e-14));
  CHECK(y.at({0, 1, 1}) == doctest::Approx(w11 * 2.0).epsilon(1e-14));

  const AttentionMask causal{1, 0, 1, 1};
  const Tensor m = mha_forward(x, x, &causal, p);
  CHECK(m.at({0, 0, 0}) == 1.0);
  CHECK(m.at({0, 0, 1}) == 0.0);
}

TEST_CASE("transformer block") {
  Rng rng(18);
  for (NormKind kind : {NormKind::dyt, NormKind::layernorm}) {
    BlockConfig cfg;
    cfg.norm_kind = kind;
    cfg.width = 8;
    cfg.heads = 2;
    TransformerBlock block(cfg, rng);
    const Tensor x = random_tensor({2, 3, 8}, rng);
    CHECK(block.forward(x, nullptr).shape() == x.shape());
    block.zero_output_projections();
    CHECK(test::bit_equal(block.forward(x, nullptr), x));
  }
}

TEST_CASE("transformer block gradients") {
  Rng rng(19);
  for (NormKind kind : {NormKind::dyt, NormKind::layernorm}) {
    BlockConfig cfg;
    cfg.norm_kind = kind;
    cfg.width = 8;
    cfg.heads = 2;
    const TransformerBlock block(cfg, rng);
    const Tensor x = random_tensor({2, 3, 8}, rng);
    ParamList named;
    block.collect(named, "b");
    std::vector<Tensor> params;
    for (auto& p : named) params.push_back(p.value);
    params.push_back(x);
    const AttentionMask mask{1, 0, 0, 1, 1, 0, 1, 1, 1, 1, 1, 1, 0, 1, 1, 1, 1, 1};
    const double err = grad_check_params([&] { return weighted_sum(block.forward(x, &mask), 5); }, params);
    CHECK(err < 1e-4);
  }
}

TEST_CASE("block config validation") {
  BlockConfig c;
  c.width = 10;
  c.heads = 4;
  CHECK_THROWS(c.validate());
  c.width = 8;
  c.dropout = 1.0;
  CHECK_THROWS(c.validate());
}
