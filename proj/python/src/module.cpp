#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <memory>
#include <string>
#include <vector>

#include "dyttp/data.hpp"
#include "dyttp/error.hpp"
#include "dyttp/evaluation.hpp"
#include "dyttp/model.hpp"
#include "dyttp/persistence.hpp"
#include "dyttp/training.hpp"

namespace py = pybind11;
using namespace dyttp;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;
using Mask = py::array_t<bool>;

Array points_array(const std::vector<Vec2>& pts, std::size_t rows, std::size_t cols) {
  Array out({rows, cols, std::size_t{2}});
  auto* p = out.mutable_data();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    p[2 * i] = pts[i].x;
    p[2 * i + 1] = pts[i].y;
  }
  return out;
}

Array polyline_array(const std::vector<Vec2>& pts) {
  Array out({pts.size(), std::size_t{2}});
  auto* p = out.mutable_data();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    p[2 * i] = pts[i].x;
    p[2 * i + 1] = pts[i].y;
  }
  return out;
}

Mask mask_array(const std::vector<std::uint8_t>& m, std::size_t rows, std::size_t cols) {
  Mask out({rows, cols});
  auto* p = out.mutable_data();
  for (std::size_t i = 0; i < m.size(); ++i) p[i] = m[i] != 0;
  return out;
}

Array tensor_array(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  Array out(shape);
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

py::dict prediction_dict(const PredictionSet& p) {
  py::dict d;
  d["locations"] = tensor_array(p.locations);
  d["scales"] = tensor_array(p.scales);
  d["probs"] = tensor_array(p.mode_probs);
  return d;
}

py::list prediction_list(const std::vector<PredictionSet>& preds) {
  py::list out;
  for (const auto& p : preds) out.append(prediction_dict(p));
  return out;
}

py::object to_py(const nlohmann::ordered_json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

nlohmann::json from_py(const py::object& o) {
  return nlohmann::json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

ModelConfig model_config(const py::object& cfg) {
  ModelConfig c = cfg.is_none() ? ModelConfig{} : model_config_from_json(from_py(cfg));
  c.validate();
  return c;
}

py::dict metrics_dict(const MetricsReport& m) {
  py::dict d;
  d["min_ade"] = m.min_ade;
  d["min_fde"] = m.min_fde;
  d["miss_rate"] = m.miss_rate;
  d["count"] = m.count;
  d["fde_count"] = m.fde_count;
  return d;
}

PredictionSet prediction_from(const Array& locations, const py::object& probs) {
  const auto info = locations.request();
  if (info.ndim != 3 || info.shape[2] != 2) throw ShapeError("locations must have shape [K, F, 2]");
  const auto k = static_cast<std::size_t>(info.shape[0]);
  const auto f = static_cast<std::size_t>(info.shape[1]);
  const auto* p = locations.data();
  PredictionSet out;
  out.locations = Tensor({k, f, 2}, std::vector<double>(p, p + k * f * 2));
  out.scales = Tensor::ones({k, f, 2});
  if (probs.is_none()) {
    out.mode_probs = Tensor::full({k}, 1.0 / static_cast<double>(k));
  } else {
    const auto pr = probs.cast<Array>();
    if (static_cast<std::size_t>(pr.size()) != k) throw ShapeError("probs must have K entries");
    out.mode_probs = Tensor({k}, std::vector<double>(pr.data(), pr.data() + k));
  }
  return out;
}

class EnsemblePredictor {
 public:
  EnsemblePredictor(const std::vector<std::string>& checkpoints, const std::string& strategy,
                    std::size_t snapshots_used) {
    if (checkpoints.empty()) throw py::value_error("at least one checkpoint is required");
    std::vector<Snapshot> snaps;
    for (const auto& path : checkpoints) {
      snaps.push_back(snaps.empty() ? load_checkpoint(path) : load_checkpoint(path, snaps.front().config));
    }
    ensemble_ = std::make_unique<Ensemble>(snaps, EnsembleConfig{parse_ensemble_strategy(strategy), snapshots_used});
  }

  py::list predict(const Scenario& s) const {
    std::vector<PredictionSet> preds;
    {
      py::gil_scoped_release release;
      preds = ensemble_->predict(s);
    }
    return prediction_list(preds);
  }

  py::dict evaluate(const std::vector<Scenario>& scenarios, std::size_t threads) const {
    MetricsReport m;
    {
      py::gil_scoped_release release;
      m = dyttp::evaluate(scenarios, [this](const Scenario& s) { return ensemble_->predict(s); }, threads);
    }
    return metrics_dict(m);
  }

  std::size_t members() const { return ensemble_->members(); }

 private:
  std::unique_ptr<Ensemble> ensemble_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Trajectory prediction core: scenarios, models, checkpoints and metrics.";

  auto base = py::register_exception<Error>(m, "Error");
  auto format = py::register_exception<FormatError>(m, "FormatError", base.ptr());
  py::register_exception<TruncationError>(m, "TruncationError", format.ptr());
  py::register_exception<CorruptionError>(m, "CorruptionError", format.ptr());
  py::register_exception<CheckpointMismatch>(m, "CheckpointMismatch", base.ptr());
  py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
  py::register_exception<DomainError>(m, "DomainError", base.ptr());

  m.attr("MISS_THRESHOLD") = kMissThreshold;

  py::class_<Scenario>(m, "Scenario")
      .def_readonly("id", &Scenario::id)
      .def_readonly("obs_len", &Scenario::obs_len)
      .def_readonly("pred_len", &Scenario::pred_len)
      .def_readonly("num_agents", &Scenario::num_agents)
      .def_readonly("focal", &Scenario::focal)
      .def_property_readonly("maneuver", [](const Scenario& s) { return std::string(to_string(s.maneuver)); })
      .def_property_readonly("history",
                             [](const Scenario& s) { return points_array(s.history, s.num_agents, s.obs_len); })
      .def_property_readonly("history_valid",
                             [](const Scenario& s) { return mask_array(s.history_valid, s.num_agents, s.obs_len); })
      .def_property_readonly("future",
                             [](const Scenario& s) { return points_array(s.future, s.num_agents, s.pred_len); })
      .def_property_readonly("future_valid",
                             [](const Scenario& s) { return mask_array(s.future_valid, s.num_agents, s.pred_len); })
      .def_property_readonly("lanes",
                             [](const Scenario& s) {
                               py::list out;
                               for (const auto& l : s.lanes) out.append(py::make_tuple(l.id, polyline_array(l.points)));
                               return out;
                             })
      .def("__eq__", [](const Scenario& a, const Scenario& b) { return a == b; })
      .def("__repr__", [](const Scenario& s) {
        return "<Scenario '" + s.id + "' agents=" + std::to_string(s.num_agents) + ">";
      });

  m.def(
      "generate_synthetic",
      [](std::size_t count, std::uint64_t seed) {
        auto split = generate_synthetic(count, seed);
        return py::make_tuple(split.train, split.val);
      },
      py::arg("count"), py::arg("seed") = 7, "Deterministic synthetic dataset; returns (train, val).");

  m.def(
      "save_scenarios",
      [](const std::filesystem::path& path, const std::vector<Scenario>& train, const std::vector<Scenario>& val,
         std::uint64_t seed) { save_scenarios(DatasetSplit{train, val, seed}, path); },
      py::arg("path"), py::arg("train"), py::arg("val"), py::arg("seed") = 0);

  m.def(
      "load_scenarios",
      [](const std::filesystem::path& path) {
        auto split = load_scenarios(path);
        return py::make_tuple(split.train, split.val, split.seed);
      },
      py::arg("path"), "Returns (train, val, seed).");

  m.def(
      "load_argoverse_csv",
      [](const std::filesystem::path& csv, const std::filesystem::path& map) { return load_argoverse_csv(csv, map); },
      py::arg("csv_path"), py::arg("map_path") = std::filesystem::path());

  m.def(
      "default_model_config", [] { return to_py(to_json(ModelConfig{})); }, "Default model hyperparameters.");

  m.def(
      "lr_at",
      [](double eta_min, double eta_max, std::size_t cycle_length, double epoch_in_cycle) {
        SchedulerConfig c;
        c.eta_min = eta_min;
        c.eta_max = eta_max;
        c.cycle_length = cycle_length;
        c.validate();
        return lr_at(c, epoch_in_cycle);
      },
      py::arg("eta_min"), py::arg("eta_max"), py::arg("cycle_length"), py::arg("epoch_in_cycle"));

  m.def(
      "min_ade",
      [](const Array& locations, const Array& gt, const py::object& valid) {
        const auto pred = prediction_from(locations, py::none());
        const auto f = static_cast<std::size_t>(gt.size() / 2);
        const Tensor g({f, 2}, std::vector<double>(gt.data(), gt.data() + 2 * f));
        std::vector<std::uint8_t> v(f, 1);
        if (!valid.is_none()) {
          const auto arr = valid.cast<py::array_t<bool>>();
          if (static_cast<std::size_t>(arr.size()) != f) throw ShapeError("valid must have F entries");
          for (std::size_t i = 0; i < f; ++i) v[i] = arr.data()[i] ? 1 : 0;
        }
        return min_ade(pred, g, v);
      },
      py::arg("locations"), py::arg("gt"), py::arg("valid") = py::none());

  m.def(
      "min_fde",
      [](const Array& locations, const Array& gt) {
        const auto pred = prediction_from(locations, py::none());
        const auto f = static_cast<std::size_t>(gt.size() / 2);
        const Tensor g({f, 2}, std::vector<double>(gt.data(), gt.data() + 2 * f));
        return min_fde(pred, g, std::vector<std::uint8_t>(f, 1));
      },
      py::arg("locations"), py::arg("gt"));

  m.def(
      "evaluate_constant_velocity",
      [](const std::vector<Scenario>& scenarios, std::size_t threads) {
        MetricsReport r;
        {
          py::gil_scoped_release release;
          r = evaluate(scenarios, constant_velocity_all, threads);
        }
        return metrics_dict(r);
      },
      py::arg("scenarios"), py::arg("threads") = 0);

  py::class_<Model>(m, "Model")
      .def(py::init([](const py::object& cfg, std::uint64_t seed) { return Model(model_config(cfg), seed); }),
           py::arg("config") = py::none(), py::arg("seed") = 7)
      .def_property_readonly("config", [](const Model& mdl) { return to_py(to_json(mdl.config())); })
      .def("parameter_count", &Model::parameter_count)
      .def("predict", [](const Model& mdl, const Scenario& s) { return prediction_list(mdl.predict(s)); })
      .def(
          "evaluate",
          [](const Model& mdl, const std::vector<Scenario>& scenarios, std::size_t threads) {
            MetricsReport r;
            {
              py::gil_scoped_release release;
              r = evaluate(scenarios, [&mdl](const Scenario& s) { return mdl.predict(s); }, threads);
            }
            return metrics_dict(r);
          },
          py::arg("scenarios"), py::arg("threads") = 0)
      .def(
          "save_checkpoint",
          [](const Model& mdl, const std::filesystem::path& path, std::size_t cycle, std::size_t epoch) {
            save_checkpoint(capture_snapshot(mdl, cycle, epoch, 0.0), path);
          },
          py::arg("path"), py::arg("cycle") = 0, py::arg("epoch") = 0);

  py::class_<EnsemblePredictor>(m, "Predictor")
      .def(py::init<const std::vector<std::string>&, const std::string&, std::size_t>(), py::arg("checkpoints"),
           py::arg("strategy") = "prediction_average", py::arg("snapshots_used") = 0)
      .def_property_readonly("members", &EnsemblePredictor::members)
      .def("predict", &EnsemblePredictor::predict, py::arg("scenario"))
      .def("evaluate", &EnsemblePredictor::evaluate, py::arg("scenarios"), py::arg("threads") = 0);

  m.def(
      "checkpoint_info",
      [](const std::filesystem::path& path) {
        const auto snap = load_checkpoint(path);
        py::dict d;
        d["cycle_index"] = snap.cycle_index;
        d["epoch"] = snap.epoch;
        d["val_min_ade"] = snap.val_min_ade;
        d["config"] = to_py(to_json(snap.config));
        return d;
      },
      py::arg("path"));
}
