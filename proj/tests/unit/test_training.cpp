#include <cmath>
#include <limits>
#include <numbers>

#include "doctest.h"
#include "dyttp/grad_check.hpp"
#include "dyttp/training.hpp"
#include "helpers.hpp"

using namespace dyttp;
using dyttp::test::bit_equal;

namespace {

// Reference values from tests/oracles/oracles.py.
constexpr double kNllUnitScale30 = 41.58883083359672;
constexpr double kCeUniform6 = 1.791759469228055;
constexpr double kCeHalf = 0.6931471805599453;

PredictionSet constant_set(std::size_t k, std::size_t f, double loc, double scale) {
  std::vector<double> probs(k, 1.0 / static_cast<double>(k));
  return PredictionSet{Tensor::full({k, f, 2}, loc), Tensor::full({k, f, 2}, scale), Tensor({k}, probs)};
}

PredictionSet endpoints(const std::vector<Vec2>& ends, std::size_t f) {
  const std::size_t k = ends.size();
  std::vector<double> loc;
  for (const auto& e : ends) {
    for (std::size_t t = 0; t < f; ++t) {
      loc.push_back(e.x * static_cast<double>(t + 1) / static_cast<double>(f));
      loc.push_back(e.y * static_cast<double>(t + 1) / static_cast<double>(f));
    }
  }
  std::vector<double> probs(k, 1.0 / static_cast<double>(k));
  return PredictionSet{Tensor({k, f, 2}, loc), Tensor::ones({k, f, 2}), Tensor({k}, probs)};
}

DatasetSplit small_data(std::size_t count, std::uint64_t seed = 3) {
  GenConfig g;
  g.obs_len = 8;
  g.pred_len = 6;
  g.max_agents = 3;
  return generate_synthetic(count, seed, g);
}

ModelConfig small_model() {
  ModelConfig c;
  c.width = 8;
  c.heads = 2;
  c.modes = 2;
  c.obs_len = 8;
  c.pred_len = 6;
  return c;
}

TrainConfig small_train(std::size_t cycles, std::size_t epochs) {
  TrainConfig t;
  t.scheduler.cycle_length = epochs;
  t.scheduler.num_cycles = cycles;
  t.batch_size = 4;
  return t;
}

}  // namespace

TEST_CASE("Laplace NLL examples") {
  const Tensor gt = Tensor::full({30, 2}, 1.25);
  const std::vector<std::uint8_t> valid(30, 1);
  const PredictionSet unit = constant_set(2, 30, 1.25, 1.0);
  CHECK(std::fabs(regression_nll(unit, 1, gt, valid).item() - kNllUnitScale30) <= 1e-12);
  const PredictionSet half = constant_set(2, 30, 1.25, 0.5);
  CHECK(regression_nll(half, 0, gt, valid).item() == 0.0);

  const PredictionSet off1 = constant_set(1, 30, 1.25 + 0.3, 0.5);
  const PredictionSet off2 = constant_set(1, 30, 1.25 + 0.6, 0.5);
  const double d = regression_nll(off2, 0, gt, valid).item() - regression_nll(off1, 0, gt, valid).item();
  CHECK(d == doctest::Approx(60.0 * 0.3 / 0.5).epsilon(1e-12));

  std::vector<std::uint8_t> partial(30, 0);
  partial[4] = 1;
  CHECK(regression_nll(unit, 0, gt, partial).item() == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-15));
  CHECK_THROWS(regression_nll(unit, 2, gt, valid));
}

TEST_CASE("Laplace NLL gradient") {
  Rng rng(1);
  const Tensor gt = test::random_tensor({5, 2}, rng, -2.0, 2.0);
  const std::vector<std::uint8_t> valid{1, 1, 0, 1, 1};
  std::vector<Tensor> params{test::random_tensor({2, 5, 2}, rng, -2.0, 2.0),
                             test::random_tensor({2, 5, 2}, rng, 0.3, 2.0)};
  const double err = grad_check_params(
      [&] {
        const PredictionSet p{params[0], params[1], Tensor::vector({0.5, 0.5})};
        return regression_nll(p, 1, gt, valid);
      },
      params);
  CHECK(err < 1e-6);
}

TEST_CASE("best mode selection") {
  const Tensor gt({3, 2}, {0, 0, 0, 0, 3, 4});
  const std::vector<std::uint8_t> valid(3, 1);
  const PredictionSet exact = endpoints({{3, 4}, {6, 4}}, 3);
  CHECK(select_best_mode(exact, gt, valid) == 0);
  const PredictionSet same = endpoints({{1, 1}, {1, 1}, {1, 1}}, 3);
  CHECK(select_best_mode(same, gt, valid) == 0);
  const PredictionSet three = endpoints({{5, 4}, {3, 4.5}, {3, 5.1}}, 3);
  CHECK(select_best_mode(three, gt, valid) == 1);
  const std::vector<std::uint8_t> last_missing{1, 1, 0};
  const Tensor gt2({3, 2}, {0, 0, 2, 2, 9, 9});
  const PredictionSet pick = endpoints({{9, 9}, {3, 3}}, 3);
  // Mode 1 passes (2, 2) at step 1, the last valid step.
  CHECK(select_best_mode(pick, gt2, last_missing) == 1);
}

TEST_CASE("classification cross entropy") {
  CHECK(classification_ce(Tensor::vector({0, 1, 0}), 1).item() == 0.0);
  const Tensor uni = Tensor::full({6}, 1.0 / 6.0);
  for (std::size_t t = 0; t < 6; ++t) CHECK(std::fabs(classification_ce(uni, t).item() - kCeUniform6) <= 1e-12);
  CHECK(std::fabs(classification_ce(Tensor::vector({0.5, 0.5}), 0).item() - kCeHalf) <= 1e-15);
  CHECK(classification_ce(Tensor::vector({1.0, 0.0}), 1).item() == doctest::Approx(-std::log(kProbabilityFloor)));
}

TEST_CASE("total loss composition") {
  const Scenario s = test::tiny_scenario(2, 1, 4, 3, 3);
  ModelOutput perfect;
  std::vector<double> loc;
  for (std::size_t a = 0; a < 2; ++a) {
    for (std::size_t k = 0; k < 2; ++k) {
      for (std::size_t t = 0; t < 3; ++t) {
        loc.push_back(s.fut(a, t).x + (k == 1 ? 5.0 : 0.0));
        loc.push_back(s.fut(a, t).y);
      }
    }
  }
  perfect.locations = Tensor({2, 2, 3, 2}, loc);
  perfect.scales = Tensor::full({2, 2, 3, 2}, 0.5);
  perfect.probs = Tensor({2, 2}, {1.0, 0.0, 1.0, 0.0});
  perfect.origins = agent_origins(s);
  const ScenarioLoss zero = scenario_loss(perfect, s);
  const LossBreakdown b = combine_losses(std::span(&zero, 1), 1.0);
  CHECK(b.total == 0.0);
  CHECK(b.agents == 2);

  const ScenarioLoss two{Tensor::scalar(4.0), Tensor::scalar(1.0), 2};
  CHECK(combine_losses(std::span(&two, 1), 1.0).total == 2.5);
  CHECK(combine_losses(std::span(&two, 1), 0.0).total == 2.0);

  const Model m(test::tiny_config(), 4);
  const std::vector<Scenario> batch{s, test::tiny_scenario(3, 0, 4, 3, 4)};
  for (double lambda : {0.0, 0.3, 1.0, 2.5}) {
    const LossBreakdown l = total_loss(m, batch, lambda);
    CHECK(std::fabs(l.total - (l.reg + lambda * l.cls)) <= 1e-12);
    CHECK(l.agents == 5);
    if (lambda == 0.0) CHECK(l.total == l.reg);
  }
}

TEST_CASE("untrainable agents do not contribute") {
  Scenario s = test::tiny_scenario(2, 0, 4, 3, 5);
  for (std::size_t t = 0; t < 3; ++t) s.history_valid[4 + t] = 0;
  CHECK(!s.trainable(1));
  const Model m(test::tiny_config(), 6);
  CHECK(scenario_loss(m.forward(s), s).agents == 1);
}

TEST_CASE("learning-rate schedule") {
  SchedulerConfig c;
  c.eta_min = 1e-5;
  c.eta_max = 3e-3;
  c.cycle_length = 8;
  CHECK(lr_at(c, 0.0) == c.eta_max);
  CHECK(lr_at(c, 8.0) == c.eta_min);
  CHECK(lr_at(c, 4.0) == doctest::Approx((c.eta_max + c.eta_min) / 2).epsilon(1e-15));
  double prev = lr_at(c, 0.0);
  for (int i = 1; i <= 1000; ++i) {
    const double e = 8.0 * i / 1000.0;
    const double lr = lr_at(c, e);
    const double ref = c.eta_min + 0.5 * (c.eta_max - c.eta_min) * (1.0 + std::cos(std::numbers::pi * e / 8.0));
    CHECK(std::fabs(lr - ref) <= 1e-12);
    CHECK(lr <= prev);
    prev = lr;
  }
  CHECK_THROWS_AS(lr_at(c, -0.1), DomainError);
  CHECK_THROWS_AS(lr_at(c, 8.5), DomainError);
  SchedulerConfig bad = c;
  bad.eta_min = 1e-2;
  CHECK_THROWS(bad.validate());
  bad = c;
  bad.cycle_length = 0;
  CHECK_THROWS(bad.validate());
}

TEST_CASE("AdamW step") {
  Tensor w = Tensor::vector({1.0}, true);
  const ParamList params{{"w", w}};
  AdamWState st;
  AdamWConfig no_decay;
  no_decay.weight_decay = 0.0;
  optimizer_step(params, 0.1, st, no_decay);
  CHECK(w.item() == 1.0);

  for (int i = 0; i < 5; ++i) {
    zero_grads(params);
    Tape tape;
    Tape::Scope scope(tape);
    tape.backward(scale(mul(w, w), 0.5));
    const double before = w.item();
    optimizer_step(params, 0.1, st);
    CHECK(std::fabs(w.item()) < std::fabs(before));
  }
  CHECK(st.step == 6);

  Tensor v = Tensor::vector({2.0, 3.0}, true);
  v.impl().grad = {1.0, std::numeric_limits<double>::quiet_NaN()};
  AdamWState s2;
  try {
    optimizer_step({{"layer.v", v}}, 0.1, s2);
    FAIL("expected DomainError");
  } catch (const DomainError& e) {
    CHECK(std::string(e.what()).find("layer.v") != std::string::npos);
  }
  CHECK(v.to_vector() == std::vector<double>{2.0, 3.0});
}

TEST_CASE("snapshots round parameters to f32") {
  const Model m(test::tiny_config(), 7);
  const Snapshot s = capture_snapshot(m, 1, 9, 0.5);
  for (const auto& t : s.params) {
    for (double v : t) CHECK(static_cast<double>(static_cast<float>(v)) == v);
  }
  CHECK(s.to_model().values() == s.params);
}

TEST_CASE("training produces one snapshot per cycle and a monotone schedule") {
  const DatasetSplit d = small_data(20);
  Model m(small_model(), 1);
  std::vector<EpochRecord> seen;
  TrainCallbacks cb;
  cb.on_epoch = [&](const EpochRecord& e) { seen.push_back(e); };
  const TrainResult r = train(m, d.train, d.val, small_train(3, 2), cb);
  REQUIRE(r.snapshots.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(r.snapshots[i].cycle_index == i);
    CHECK(r.snapshots[i].epoch == 2 * (i + 1));
  }
  CHECK(r.log.size() == 6);
  CHECK(seen.size() == 6);
  for (std::size_t e = 0; e < 6; ++e) {
    CHECK(r.log[e].cycle == e / 2);
    if (e % 2 == 1) CHECK(r.log[e].lr <= r.log[e - 1].lr);
    CHECK(std::isfinite(r.log[e].train_loss));
  }
  CHECK(r.log[2].lr == 3e-3);
  CHECK(r.snapshots.back().params == capture_snapshot(m, 2, 6, 0).params);
}

TEST_CASE("training is deterministic and resumes exactly") {
  const DatasetSplit d = small_data(16);
  const TrainConfig tc = small_train(2, 2);
  Model a(small_model(), 2);
  std::vector<TrainState> states;
  TrainCallbacks cb;
  cb.on_state = [&](const TrainState& s) { states.push_back(s); };
  const TrainResult ra = train(a, d.train, d.val, tc, cb);
  Model b(small_model(), 2);
  const TrainResult rb = train(b, d.train, d.val, tc);
  CHECK(a.values() == b.values());
  REQUIRE(states.size() == 4);
  for (std::size_t cut : {std::size_t{0}, std::size_t{1}, std::size_t{2}}) {
    Model c(small_model(), 99);
    const TrainResult rc = train(c, d.train, d.val, tc, {}, &states[cut]);
    CHECK(c.values() == a.values());
    REQUIRE(rc.log.size() == ra.log.size());
    for (std::size_t e = 0; e < ra.log.size(); ++e) CHECK(rc.log[e].to_json() == ra.log[e].to_json());
    REQUIRE(rc.snapshots.size() == 2);
    CHECK(rc.snapshots[1].params == ra.snapshots[1].params);
  }
}

TEST_CASE("optimizer reset on restart changes the trajectory") {
  const DatasetSplit d = small_data(12);
  TrainConfig keep = small_train(2, 1);
  TrainConfig reset = keep;
  reset.optimizer.reset_on_restart = true;
  Model a(small_model(), 3);
  Model b(small_model(), 3);
  train(a, d.train, d.val, keep);
  train(b, d.train, d.val, reset);
  CHECK(a.values() != b.values());
}

TEST_CASE("divergence is reported with the last good cycle") {
  const DatasetSplit d = small_data(12);
  TrainConfig t = small_train(2, 1);
  t.scheduler.eta_max = 1e300;
  t.scheduler.eta_min = 1e299;
  t.grad_clip = 0.0;
  Model m(small_model(), 4);
  try {
    train(m, d.train, d.val, t);
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(!e.last_good_cycle.has_value());
  }
}

TEST_CASE("ensemble identities") {
  const Model m(test::tiny_config(), 8);
  const Snapshot snap = capture_snapshot(m, 0, 1, 0.0);
  const Model single = snap.to_model();
  const Scenario s = test::tiny_scenario(3, 2, 4, 3, 9);
  const auto plain = single.predict(s);
  for (auto strategy : {EnsembleStrategy::prediction_average, EnsembleStrategy::parameter_average}) {
    for (std::size_t copies : {1, 2, 3, 5}) {
      const std::vector<Snapshot> snaps(copies, snap);
      const auto out = ensemble_predict(snaps, s, {strategy, 0});
      REQUIRE(out.size() == plain.size());
      for (std::size_t a = 0; a < out.size(); ++a) CHECK(bit_equal(out[a], plain[a]));
    }
  }
}

TEST_CASE("ensemble averaging") {
  PredictionSet a = constant_set(2, 3, 0.0, 1.0);
  PredictionSet b = constant_set(2, 3, 0.0, 1.0);
  std::vector<double> la(12, 5.0);
  std::vector<double> lb(12, 5.0);
  for (std::size_t i = 6; i < 12; ++i) {
    la[i] = 5.0 + 0.75;
    lb[i] = 5.0 - 0.75;
  }
  a.locations = Tensor({2, 3, 2}, la);
  b.locations = Tensor({2, 3, 2}, lb);
  a.mode_probs = Tensor::vector({0.2, 0.8});
  b.mode_probs = Tensor::vector({0.6, 0.4});
  const std::vector<PredictionSet> sets{a, b};
  const PredictionSet mid = average_predictions(sets);
  for (double v : mid.locations.data()) CHECK(v == 5.0);
  CHECK(mid.mode_probs.data()[0] == doctest::Approx(0.4));

  const Model m1(test::tiny_config(), 1);
  const Model m2(test::tiny_config(), 2);
  const std::vector<Snapshot> snaps{capture_snapshot(m1, 0, 1, 0), capture_snapshot(m2, 1, 2, 0)};
  const Scenario s = test::tiny_scenario(2, 1, 4, 3, 3);
  const auto latest = ensemble_predict(snaps, s, {EnsembleStrategy::prediction_average, 1});
  const auto direct = snaps[1].to_model().predict(s);
  CHECK(bit_equal(latest[0], direct[0]));
  const Ensemble pa(snaps, {EnsembleStrategy::parameter_average, 0});
  CHECK(pa.members() == 1);
  const Ensemble pred(snaps, {EnsembleStrategy::prediction_average, 0});
  CHECK(pred.members() == 2);

  ModelConfig other = test::tiny_config();
  other.norm_kind = NormKind::layernorm;
  const std::vector<Snapshot> mixed{snaps[0], capture_snapshot(Model(other, 1), 1, 2, 0)};
  CHECK_THROWS_AS(Ensemble(mixed, {}), CheckpointMismatch);
  CHECK_THROWS(Ensemble({}, {}));
  CHECK(parse_ensemble_strategy("parameter_average") == EnsembleStrategy::parameter_average);
  CHECK_THROWS(parse_ensemble_strategy("median"));
}
