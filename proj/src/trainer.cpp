#include <cmath>
#include <sstream>

#include "dyttp/error.hpp"
#include "dyttp/evaluation.hpp"
#include "dyttp/training.hpp"
#include "json.hpp"

namespace dyttp {

Model Snapshot::to_model() const {
  Model m(config, 0);
  m.load_values(params);
  return m;
}

Snapshot capture_snapshot(const Model& model, std::size_t cycle, std::size_t epoch, double val_min_ade) {
  Snapshot s;
  s.cycle_index = cycle;
  s.epoch = epoch;
  s.val_min_ade = val_min_ade;
  s.config = model.config();
  s.params = model.values();
  for (auto& tensor : s.params)
    for (auto& v : tensor) v = static_cast<double>(static_cast<float>(v));
  return s;
}

std::string EpochRecord::to_json() const {
  nlohmann::ordered_json j{{"epoch", epoch},           {"cycle", cycle},         {"lr", lr},
                           {"train_loss", train_loss}, {"val_minADE", val_min_ade}, {"val_minFDE", val_min_fde},
                           {"val_MR", val_mr}};
  return j.dump();
}

namespace {

void clip_gradients(const ParamList& params, double max_norm) {
  if (!(max_norm > 0.0)) return;
  double sq = 0.0;
  for (const auto& p : params)
    for (double g : p.value.impl().grad) sq += g * g;
  const double norm = std::sqrt(sq);
  if (!(norm > max_norm)) return;
  const double f = max_norm / norm;
  for (const auto& p : params)
    for (double& g : p.value.impl().grad) g *= f;
}

std::size_t trainable_agents(const Scenario& s) {
  std::size_t n = 0;
  for (std::size_t a = 0; a < s.num_agents; ++a) n += s.trainable(a) ? 1 : 0;
  return n;
}

}  // namespace

TrainResult train(Model& model, const std::vector<Scenario>& train_set, const std::vector<Scenario>& val_set,
                  const TrainConfig& cfg, const TrainCallbacks& callbacks, const TrainState* resume) {
  cfg.scheduler.validate();
  if (cfg.batch_size == 0) throw Error("batch size must be >= 1");
  std::vector<const Scenario*> pool;
  std::vector<std::size_t> pool_agents;
  for (const auto& s : train_set) {
    const std::size_t n = trainable_agents(s);
    if (n == 0) continue;
    pool.push_back(&s);
    pool_agents.push_back(n);
  }
  if (pool.empty()) throw Error("training set has no scenario with a trainable agent");
  const std::span<const Scenario> val_view =
      cfg.val_subset > 0 && cfg.val_subset < val_set.size() ? std::span(val_set).first(cfg.val_subset)
                                                            : std::span<const Scenario>(val_set);

  const ParamList params = model.named_parameters();
  Rng rng(cfg.seed);
  AdamWState opt;
  TrainResult result;
  std::size_t first_epoch = 0;
  if (resume != nullptr) {
    model.load_values(resume->params);
    opt = resume->optimizer;
    rng.set_state(resume->rng_state);
    result.log = resume->log;
    result.snapshots = resume->snapshots;
    first_epoch = resume->next_epoch;
  }

  const std::size_t cycle_len = cfg.scheduler.cycle_length;
  const std::size_t total_epochs = cycle_len * cfg.scheduler.num_cycles;
  const std::size_t batches = (pool.size() + cfg.batch_size - 1) / cfg.batch_size;
  std::vector<std::size_t> order(pool.size());
  const auto diverged = [&](const std::string& what) {
    std::optional<std::size_t> last;
    if (!result.snapshots.empty()) last = result.snapshots.back().cycle_index;
    throw DivergenceError(what, last);
  };

  for (std::size_t epoch = first_epoch; epoch < total_epochs; ++epoch) {
    const std::size_t cycle = epoch / cycle_len;
    const std::size_t in_cycle = epoch % cycle_len;
    if (in_cycle == 0 && epoch > 0 && cfg.optimizer.reset_on_restart) opt.reset();

    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

    EpochRecord rec;
    rec.epoch = epoch;
    rec.cycle = cycle;
    rec.lr = lr_at(cfg.scheduler, static_cast<double>(in_cycle));
    double loss_sum = 0.0;
    std::size_t agent_sum = 0;
    ForwardContext ctx{true, &rng};

    for (std::size_t b = 0; b < batches; ++b) {
      const std::size_t lo = b * cfg.batch_size;
      const std::size_t hi = std::min(lo + cfg.batch_size, order.size());
      std::size_t batch_agents = 0;
      for (std::size_t i = lo; i < hi; ++i) batch_agents += pool_agents[order[i]];
      const double weight = 1.0 / static_cast<double>(batch_agents);
      for (std::size_t i = lo; i < hi; ++i) {
        const Scenario& s = *pool[order[i]];
        Tape tape;
        Tape::Scope scope(tape);
        Tensor loss;
        try {
          const ScenarioLoss l = scenario_loss(model.forward(s, ctx), s);
          loss = add(l.reg_sum, scale(l.cls_sum, cfg.lambda));
        } catch (const DomainError& e) {
          diverged("epoch " + std::to_string(epoch) + ", scenario '" + s.id + "': " + e.what());
        }
        const double value = loss.item();
        if (!std::isfinite(value)) {
          diverged("non-finite loss in epoch " + std::to_string(epoch) + " on scenario '" + s.id + "'");
        }
        loss_sum += value;
        tape.backward(loss, weight);
      }
      agent_sum += batch_agents;
      clip_gradients(params, cfg.grad_clip);
      const double e_cur = static_cast<double>(in_cycle) + static_cast<double>(b + 1) / static_cast<double>(batches);
      try {
        optimizer_step(params, lr_at(cfg.scheduler, e_cur), opt, cfg.optimizer);
      } catch (const DomainError& e) {
        diverged(e.what());
      }
      zero_grads(params);
    }
    rec.train_loss = loss_sum / static_cast<double>(agent_sum);

    if (!val_view.empty()) {
      const MetricsReport m = evaluate(val_view, [&](const Scenario& s) { return model.predict(s); });
      rec.val_min_ade = m.min_ade;
      rec.val_min_fde = m.min_fde;
      rec.val_mr = m.miss_rate;
    }
    result.log.push_back(rec);
    if (callbacks.on_epoch) callbacks.on_epoch(rec);

    if (in_cycle + 1 == cycle_len) {
      result.snapshots.push_back(capture_snapshot(model, cycle, epoch + 1, rec.val_min_ade));
      if (callbacks.on_snapshot) callbacks.on_snapshot(result.snapshots.back());
    }
    if (callbacks.on_state) {
      TrainState st;
      st.next_epoch = epoch + 1;
      st.params = model.values();
      st.optimizer = opt;
      st.rng_state = rng.state();
      st.log = result.log;
      st.snapshots = result.snapshots;
      callbacks.on_state(st);
    }
  }
  return result;
}

}  // namespace dyttp
