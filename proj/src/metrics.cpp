#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <mutex>
#include <optional>
#include <thread>

#include "dyttp/error.hpp"
#include "dyttp/evaluation.hpp"

namespace dyttp {

namespace {

double step_error(const PredictionSet& pred, std::size_t k, std::size_t t, const Tensor& gt) {
  const Vec2 p = pred.location(k, t);
  const double dx = p.x - gt.data()[t * 2];
  const double dy = p.y - gt.data()[t * 2 + 1];
  return std::sqrt(dx * dx + dy * dy);
}

void check_shapes(const PredictionSet& pred, const Tensor& gt, std::span<const std::uint8_t> valid) {
  const std::size_t f = pred.horizon();
  if (pred.locations.dim() != 3 || gt.shape() != Shape{f, 2} || valid.size() != f) {
    throw ShapeError("prediction " + shape_to_string(pred.locations.shape()) + " vs ground truth " +
                     shape_to_string(gt.shape()));
  }
}

}  // namespace

nlohmann::ordered_json MetricsReport::to_json() const {
  return {{"minADE", min_ade}, {"minFDE", min_fde}, {"MR", miss_rate}, {"count", count}, {"fde_count", fde_count}};
}

double min_ade(const PredictionSet& pred, const Tensor& gt, std::span<const std::uint8_t> valid) {
  check_shapes(pred, gt, valid);
  const std::size_t f = pred.horizon();
  std::size_t n = 0;
  for (auto v : valid) n += v ? 1 : 0;
  if (n == 0) throw DomainError("minADE needs at least one valid future step");
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < pred.modes(); ++k) {
    double sum = 0.0;
    for (std::size_t t = 0; t < f; ++t)
      if (valid[t]) sum += step_error(pred, k, t, gt);
    best = std::min(best, sum / static_cast<double>(n));
  }
  return best;
}

double min_fde(const PredictionSet& pred, const Tensor& gt, std::span<const std::uint8_t> valid) {
  check_shapes(pred, gt, valid);
  const std::size_t f = pred.horizon();
  if (f == 0 || !valid[f - 1]) throw DomainError("minFDE needs a valid final step");
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < pred.modes(); ++k) best = std::min(best, step_error(pred, k, f - 1, gt));
  return best;
}

double miss_rate(std::span<const PredictionSet> preds, std::span<const Tensor> gts,
                 std::span<const std::vector<std::uint8_t>> valids) {
  if (preds.size() != gts.size() || preds.size() != valids.size()) throw ShapeError("miss_rate input sizes differ");
  std::size_t total = 0;
  std::size_t misses = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const std::size_t f = preds[i].horizon();
    if (f == 0 || valids[i].size() != f || !valids[i][f - 1]) continue;
    ++total;
    if (min_fde(preds[i], gts[i], valids[i]) > kMissThreshold) ++misses;
  }
  if (total == 0) throw DomainError("miss rate over an empty set");
  return static_cast<double>(misses) / static_cast<double>(total);
}

Tensor future_tensor(const Scenario& s, std::size_t agent) {
  std::vector<double> v(s.pred_len * 2);
  for (std::size_t t = 0; t < s.pred_len; ++t) {
    v[t * 2] = s.fut(agent, t).x;
    v[t * 2 + 1] = s.fut(agent, t).y;
  }
  return Tensor({s.pred_len, 2}, std::move(v));
}

std::vector<std::uint8_t> future_mask(const Scenario& s, std::size_t agent) {
  return {s.future_valid.begin() + static_cast<std::ptrdiff_t>(agent * s.pred_len),
          s.future_valid.begin() + static_cast<std::ptrdiff_t>((agent + 1) * s.pred_len)};
}

std::size_t default_threads() {
  if (const char* env = std::getenv("DYTTP_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1) return static_cast<std::size_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

MetricsReport evaluate(std::span<const Scenario> scenarios, const Predictor& predictor, std::size_t threads) {
  struct Item {
    std::optional<double> ade;
    std::optional<double> fde;
  };
  std::vector<Item> items(scenarios.size());
  const auto work = [&](std::size_t i) {
    const Scenario& s = scenarios[i];
    const auto preds = predictor(s);
    if (preds.size() <= s.focal) throw Error("predictor returned too few prediction sets for '" + s.id + "'");
    const auto& pred = preds[s.focal];
    const Tensor gt = future_tensor(s, s.focal);
    const auto valid = future_mask(s, s.focal);
    if (std::any_of(valid.begin(), valid.end(), [](auto v) { return v != 0; })) items[i].ade = min_ade(pred, gt, valid);
    if (!valid.empty() && valid.back()) items[i].fde = min_fde(pred, gt, valid);
  };

  if (threads == 0) threads = default_threads();
  threads = std::min(threads, std::max<std::size_t>(1, scenarios.size()));
  if (threads <= 1) {
    for (std::size_t i = 0; i < scenarios.size(); ++i) work(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < threads; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i; (i = next.fetch_add(1)) < scenarios.size();) {
          try {
            work(i);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
  }

  MetricsReport r;
  double ade = 0.0;
  double fde = 0.0;
  std::size_t misses = 0;
  for (const auto& it : items) {
    if (it.ade) {
      ade += *it.ade;
      ++r.count;
    }
    if (it.fde) {
      fde += *it.fde;
      misses += *it.fde > kMissThreshold ? 1 : 0;
      ++r.fde_count;
    }
  }
  if (r.count > 0) r.min_ade = ade / static_cast<double>(r.count);
  if (r.fde_count > 0) {
    r.min_fde = fde / static_cast<double>(r.fde_count);
    r.miss_rate = static_cast<double>(misses) / static_cast<double>(r.fde_count);
  }
  return r;
}

PredictionSet constant_velocity(const Scenario& s, std::size_t agent) {
  const std::size_t f = s.pred_len;
  Vec2 last;
  Vec2 velocity;
  std::size_t last_t = s.obs_len;
  for (std::size_t t = s.obs_len; t-- > 0;) {
    if (s.hist_valid(agent, t)) {
      last_t = t;
      break;
    }
  }
  if (last_t == s.obs_len) {
    s.last_observed(s.focal, last);
  } else {
    last = s.hist(agent, last_t);
    if (last_t > 0 && s.hist_valid(agent, last_t - 1)) velocity = last - s.hist(agent, last_t - 1);
  }
  std::vector<double> loc(f * 2);
  for (std::size_t t = 0; t < f; ++t) {
    const Vec2 p = last + static_cast<double>(t + 1) * velocity;
    loc[t * 2] = p.x;
    loc[t * 2 + 1] = p.y;
  }
  return PredictionSet{Tensor({1, f, 2}, std::move(loc)), Tensor::ones({1, f, 2}), Tensor::ones({1})};
}

std::vector<PredictionSet> constant_velocity_all(const Scenario& s) {
  std::vector<PredictionSet> out;
  for (std::size_t a = 0; a < s.num_agents; ++a) out.push_back(constant_velocity(s, a));
  return out;
}

}  // namespace dyttp
