// Copyright 2026 The sst-lab Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// =============================================================================

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "sst/errors.hpp"
#include "sst/eval.hpp"
#include "sst/experiment.hpp"
#include "sst/version.hpp"

namespace py = pybind11;
using namespace sst;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a) {
  if (a.ndim() != 2) throw DimensionError("expected a 2-d array");
  const auto r = static_cast<std::size_t>(a.shape(0));
  const auto c = static_cast<std::size_t>(a.shape(1));
  return Tensor::matrix(r, c, std::vector<double>(a.data(), a.data() + r * c));
}

Array to_array(const Tensor& t) {
  const auto d = t.data();
  if (t.rank() == 2) {
    Array out({t.rows(), t.cols()});
    std::copy(d.begin(), d.end(), out.mutable_data());
    return out;
  }
  Array out(static_cast<py::ssize_t>(d.size()));
  std::copy(d.begin(), d.end(), out.mutable_data());
  return out;
}

LossConfig loss_config(const std::string& kind, std::optional<double> scale, std::optional<double> margin) {
  LossConfig c = LossConfig::defaults_for(parse_loss_kind(kind));
  if (scale) c.scale = *scale;
  if (margin) c.margin = *margin;
  c.validate();
  return c;
}

}  // namespace

PYBIND11_MODULE(_sst, m) {
  m.doc() = "Semi-Siamese training desk lab";
  m.attr("__version__") = kVersion;

  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ContractError>(m, "ContractError", PyExc_RuntimeError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_RuntimeError);
  py::register_exception<DivergenceError>(m, "DivergenceError", PyExc_RuntimeError);

  py::class_<GenSpec>(m, "GenSpec")
      .def(py::init<>())
      .def_readwrite("n_ids", &GenSpec::n_ids)
      .def_readwrite("depth", &GenSpec::depth)
      .def_readwrite("input_dim", &GenSpec::input_dim)
      .def_readwrite("class_separation", &GenSpec::class_separation)
      .def_readwrite("sigma_intra", &GenSpec::sigma_intra)
      .def_readwrite("shift_strength", &GenSpec::shift_strength)
      .def_readwrite("test_fraction", &GenSpec::test_fraction)
      .def_readwrite("seed", &GenSpec::seed);

  py::class_<ShallowDataset>(m, "Dataset")
      .def_property_readonly("input_dim", [](const ShallowDataset& d) { return d.input_dim; })
      .def("__len__", [](const ShallowDataset& d) { return d.records.size(); })
      .def("ids", [](const ShallowDataset& d, const std::string& split) {
        return d.ids(split == "test" ? Split::kTest : Split::kTrain);
      }, py::arg("split") = "train")
      .def("features", [](const ShallowDataset& d) {
        Array out({d.records.size(), d.input_dim});
        double* p = out.mutable_data();
        for (const auto& r : d.records) p = std::copy(r.x.begin(), r.x.end(), p);
        return out;
      })
      .def("save", [](const ShallowDataset& d, const std::filesystem::path& p) { save_dataset(d, p); });
  m.def("generate", &generate, py::arg("spec"));
  m.def("load_dataset", &load_dataset, py::arg("path"));

  py::class_<Encoder>(m, "Encoder")
      .def(py::init([](std::size_t input_dim, std::vector<std::size_t> hidden, std::size_t embed_dim,
                       std::uint64_t seed) { return Encoder({input_dim, std::move(hidden), embed_dim, seed}); }),
           py::arg("input_dim"), py::arg("hidden_dims"), py::arg("embed_dim"), py::arg("seed") = 0)
      .def("forward", [](const Encoder& e, const Array& x) { return to_array(e.forward(to_tensor(x), false)); })
      .def_property_readonly("parameter_count", &Encoder::parameter_count)
      .def("clone", &Encoder::clone);
  m.def("param_distance", py::overload_cast<const Encoder&, const Encoder&>(&param_distance));
  m.def("moving_average_update", &moving_average_update, py::arg("gallery"), py::arg("probe"), py::arg("m"));

  py::class_<GalleryQueue>(m, "GalleryQueue")
      .def(py::init<std::size_t, std::size_t, std::uint64_t>(), py::arg("capacity"), py::arg("dim"),
           py::arg("seed") = 0)
      .def_static("empty", &GalleryQueue::empty, py::arg("capacity"), py::arg("dim"))
      .def("enqueue", [](GalleryQueue& q, const Array& feats, const std::vector<std::int64_t>& ids) {
        q.enqueue_batch(to_tensor(feats), ids);
      })
      .def_property_readonly("capacity", &GalleryQueue::capacity)
      .def_property_readonly("filled", &GalleryQueue::filled)
      .def("ids_in_arrival_order", [](const GalleryQueue& q) {
        std::vector<std::int64_t> out;
        for (auto s : q.slots_in_arrival_order()) out.push_back(q.id(s));
        return out;
      })
      .def("negative_count", [](const GalleryQueue& q, std::int64_t id) { return q.negatives_for(id).size(); });

  m.def("sst_loss",
        [](const Array& probe, const Array& gallery, const std::vector<std::int64_t>& ids, const GalleryQueue& q,
           const std::string& kind, std::optional<double> scale, std::optional<double> margin) {
          return sst_loss(to_tensor(probe), to_tensor(gallery), ids, q, loss_config(kind, scale, margin)).item();
        },
        py::arg("probe"), py::arg("gallery"), py::arg("ids"), py::arg("queue"), py::arg("kind") = "softmax",
        py::arg("scale") = py::none(), py::arg("margin") = py::none());
  m.def("classification_loss",
        [](const Array& feats, const std::vector<std::size_t>& labels, const Array& prototypes,
           const std::string& kind, std::optional<double> scale, std::optional<double> margin) {
          return classification_loss(to_tensor(feats), labels, PrototypeMatrix(to_tensor(prototypes)),
                                     loss_config(kind, scale, margin))
              .item();
        },
        py::arg("features"), py::arg("labels"), py::arg("prototypes"), py::arg("kind") = "softmax",
        py::arg("scale") = py::none(), py::arg("margin") = py::none());
  m.def("margin_transform", [](double c, const std::string& kind, double margin) {
    return margin_transform(c, parse_loss_kind(kind), margin);
  });

  py::class_<FarPoint>(m, "FarPoint")
      .def_readonly("far", &FarPoint::far)
      .def_readonly("tpr", &FarPoint::tpr)
      .def_readonly("threshold", &FarPoint::threshold)
      .def_readonly("achieved_far", &FarPoint::achieved_far)
      .def_readonly("low_confidence", &FarPoint::low_confidence);
  m.def("tpr_at_far",
        [](std::vector<double> genuine, std::vector<double> impostor, const std::vector<double>& fars) {
          return tpr_at_far(ScoreSet{std::move(genuine), std::move(impostor)}, fars);
        },
        py::arg("genuine"), py::arg("impostor"), py::arg("far_levels"));
  m.def("tenfold_accuracy",
        [](const std::vector<double>& scores, const std::vector<bool>& genuine, const std::vector<int>& folds) {
          if (scores.size() != genuine.size() || scores.size() != folds.size()) {
            throw ContractError("scores, genuine and folds must have equal length");
          }
          std::vector<FoldedScore> s;
          for (std::size_t i = 0; i < scores.size(); ++i) s.push_back({scores[i], genuine[i], folds[i]});
          return tenfold_accuracy(s);
        },
        py::arg("scores"), py::arg("genuine"), py::arg("folds"));
  m.def("rank1_identification",
        [](const Array& g, const std::vector<std::int64_t>& gid, const Array& p, const std::vector<std::int64_t>& pid) {
          return rank1_identification(to_tensor(g), gid, to_tensor(p), pid);
        });
  m.def("oscillation_metric", [](const std::vector<double>& h, std::size_t w) { return oscillation_metric(h, w); },
        py::arg("history"), py::arg("window") = 50);

  py::class_<ExperimentConfig>(m, "ExperimentConfig")
      .def(py::init(&default_config))
      .def("set", &set_config_value, py::arg("key"), py::arg("value"))
      .def("echo", &ExperimentConfig::echo)
      .def("validate", &ExperimentConfig::validate);
  m.def("parse_config", &parse_config, py::arg("text"));
  m.def("config_keys", &config_keys);

  m.def("train_run",
        [](const ExperimentConfig& cfg) {
          cfg.validate();
          const ShallowDataset ds = obtain_dataset(cfg);
          const TrainConfig tc = resolve_train(cfg, ds);
          TrainResult r = [&] {
            py::gil_scoped_release release;
            return train(tc, ds);
          }();
          py::dict out;
          out["losses"] = r.log.losses();
          out["training_rank1"] = training_rank1(r, ds);
          if (r.prototypes || r.queue) out["zero_fraction"] = final_prototype_histogram(r).zero_fraction;
          const EvalReport rep = evaluate(r.probe_net(), ds, cfg.eval);
          out["tenfold_accuracy"] = rep.tenfold_accuracy;
          out["rank1"] = rep.rank1;
          py::dict tpr;
          for (const auto& p : rep.roc) tpr[py::float_(p.far)] = p.tpr;
          out["tpr_at_far"] = tpr;
          return out;
        },
        py::arg("config"));
}
