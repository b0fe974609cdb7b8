#include <cmath>

#include "doctest.h"
#include "dyttp/persistence.hpp"
#include "grad_suite.hpp"
#include "helpers.hpp"
#include "naive_metrics.hpp"

using namespace dyttp;

TEST_CASE("every differentiable op passes the finite-difference check") {
  const auto cases = test::op_grad_checks();
  CHECK(cases.size() >= 30);
  for (const auto& c : cases) {
    INFO(c.name << " error " << c.error);
    CHECK(c.error < 1e-4);
  }
}

TEST_CASE("grad checks hold across seeds") {
  for (std::uint64_t seed : {1, 2, 3}) {
    for (const auto& c : test::op_grad_checks(seed)) {
      INFO(c.name << " seed " << seed << " error " << c.error);
      CHECK(c.error < 1e-4);
    }
  }
}

TEST_CASE("metrics equal the naive loops exactly") {
  const auto r = test::run_metric_oracle(1000, 77);
  CHECK(r.instances == 1000);
  CHECK(r.mismatches == 0);
  CHECK(r.boundary_instances > 10);
  CHECK(r.boundary_rule_ok);
}

TEST_CASE("checkpoint round trip is bit exact for random models") {
  Rng rng(5);
  for (int trial = 0; trial < 6; ++trial) {
    ModelConfig c = test::tiny_config();
    c.width = 4 * (1 + rng.below(3));
    c.heads = 2;
    c.modes = 1 + rng.below(4);
    c.blocks_per_stage = 1 + rng.below(2);
    c.norm_kind = rng.below(2) == 0 ? NormKind::dyt : NormKind::layernorm;
    const Model m(c, rng.next_u64());
    const Snapshot s = capture_snapshot(m, trial, trial * 3, rng.uniform());
    const auto bytes = encode_checkpoint(s);
    const Snapshot back = decode_checkpoint(bytes);
    CHECK(back.params == s.params);
    CHECK(back.config.digest() == c.digest());
    CHECK(back.val_min_ade == s.val_min_ade);
    CHECK(encode_checkpoint(back) == bytes);
  }
}

TEST_CASE("scenario container round trip holds for random scenarios") {
  Rng rng(6);
  DatasetSplit split;
  split.seed = 3;
  for (int i = 0; i < 20; ++i) {
    Scenario s = test::tiny_scenario(1 + rng.below(5), rng.below(4), 20, 30, rng.next_u64());
    for (std::size_t a = 0; a < s.num_agents; ++a) {
      if (a != s.focal && rng.below(3) == 0) s.future_valid[a * 30 + rng.below(30)] = 0;
    }
    (i % 2 == 0 ? split.train : split.val).push_back(s);
  }
  CHECK(decode_scenarios(encode_scenarios(split)) == split);
}

TEST_CASE("single-byte corruption is always detected") {
  const Model m(test::tiny_config(), 1);
  const auto bytes = encode_checkpoint(capture_snapshot(m, 0, 1, 0.0));
  Rng rng(7);
  for (int i = 0; i < 200; ++i) {
    auto damaged = bytes;
    const std::size_t pos = rng.below(bytes.size());
    damaged[pos] ^= static_cast<std::uint8_t>(1 + rng.below(255));
    CHECK_THROWS_AS(decode_checkpoint(damaged), FormatError);
  }
  for (int i = 0; i < 50; ++i) {
    const std::size_t cut = rng.below(bytes.size());
    CHECK_THROWS_AS(decode_checkpoint(std::span(bytes.data(), cut)), TruncationError);
  }
}

TEST_CASE("datasets regenerate identically for many seeds") {
  for (std::uint64_t seed : {0, 1, 99, 123456789}) {
    CHECK(encode_scenarios(generate_synthetic(30, seed)) == encode_scenarios(generate_synthetic(30, seed)));
  }
}
