#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "tshint/attribution.hpp"
#include "tshint/dataset.hpp"
#include "tshint/evaluation.hpp"
#include "tshint/graph.hpp"
#include "tshint/hinting.hpp"
#include "tshint/model.hpp"
#include "tshint/training.hpp"
#include "tshint/util.hpp"

namespace py = pybind11;
using namespace tshint;

namespace {

Tensor tensor_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  std::vector<std::size_t> shape(a.ndim());
  for (py::ssize_t i = 0; i < a.ndim(); ++i) shape[i] = static_cast<std::size_t>(a.shape(i));
  std::vector<double> data(a.data(), a.data() + a.size());
  return Tensor(std::move(shape), std::move(data));
}

py::array_t<double> array_from_tensor(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  py::array_t<double> a(shape);
  std::copy(t.data(), t.data() + t.size(), a.mutable_data());
  return a;
}

ModelConfig config_from_kwargs(std::size_t n_channels, std::size_t t_len, std::size_t patch_len,
                               std::size_t stride, std::size_t d_model, std::size_t n_heads,
                               std::size_t n_layers, std::size_t ffn_dim,
                               std::vector<std::size_t> head_dims, const std::string& activation,
                               std::uint64_t seed) {
  ModelConfig cfg;
  cfg.n_channels = n_channels;
  cfg.t_len = t_len;
  cfg.patch_len = patch_len;
  cfg.stride = stride;
  cfg.d_model = d_model;
  cfg.n_heads = n_heads;
  cfg.n_layers = n_layers;
  cfg.ffn_dim = ffn_dim;
  cfg.head_dims = std::move(head_dims);
  cfg.activation = activation == "gelu" ? ModelConfig::Activation::Gelu
                                        : ModelConfig::Activation::Relu;
  cfg.seed = seed;
  return cfg;
}

std::optional<AttentionHint> hint_from_args(const py::object& h, double lambda) {
  if (h.is_none()) return std::nullopt;
  AttentionHint hint;
  hint.h = tensor_from_array(h.cast<py::array_t<double>>());
  hint.lambda = lambda;
  return hint;
}

}  // namespace

PYBIND11_MODULE(tshint, m) {
  m.doc() = "patch-transformer extrinsic regression with attention hints";

  py::register_exception<Error>(m, "TshintError");

  py::class_<SampleTensor>(m, "Sample")
      .def_property_readonly("values", [](const SampleTensor& s) { return array_from_tensor(s.values); })
      .def_readonly("target", &SampleTensor::target)
      .def_readonly("run_id", &SampleTensor::run_id)
      .def_property_readonly("mode", [](const SampleTensor& s) { return mode_name(s.mode); });

  m.def("channel_names", [] { return default_channel_names(); });

  m.def(
      "resample_linear",
      [](const std::vector<double>& series, std::size_t t_len) {
        return resample_linear(series, t_len);
      },
      py::arg("series"), py::arg("t_len"));

  m.def(
      "normalize",
      [](const py::array_t<double>& values) {
        SampleTensor s = normalize(tensor_from_array(values));
        std::vector<std::pair<double, double>> stats;
        for (const auto& ns : s.norm_stats) stats.emplace_back(ns.mean, ns.std);
        return py::make_tuple(array_from_tensor(s.values), stats);
      },
      py::arg("values"));

  m.def(
      "softmax_rows",
      [](const py::array_t<double>& values) {
        Graph g;
        NodeId out = g.softmax_rows(g.constant(tensor_from_array(values)));
        return array_from_tensor(g.value(out));
      },
      py::arg("values"));

  m.def(
      "synthesize_csv",
      [](const std::filesystem::path& path, std::size_t n_low, std::size_t n_high,
         std::size_t min_length, std::size_t max_length, double preston_k, double noise_std,
         double nonpreston_coeff, std::uint64_t seed) {
        SynthConfig cfg;
        cfg.n_low = n_low;
        cfg.n_high = n_high;
        cfg.min_length = min_length;
        cfg.max_length = max_length;
        cfg.preston_k = preston_k;
        cfg.noise_std = noise_std;
        cfg.nonpreston_coeff = nonpreston_coeff;
        cfg.seed = seed;
        std::vector<WaferRun> runs = synthesize(cfg);
        save_runs(runs, path);
        return runs.size();
      },
      py::arg("path"), py::arg("n_low"), py::arg("n_high"), py::arg("min_length") = 64,
      py::arg("max_length") = 128, py::arg("preston_k") = 1.0, py::arg("noise_std") = 0.0,
      py::arg("nonpreston_coeff") = 0.0, py::arg("seed") = 0);

  m.def(
      "load_samples",
      [](const std::filesystem::path& path, std::size_t t_len) {
        return make_samples(load_runs(path), t_len);
      },
      py::arg("path"), py::arg("t_len") = 128);

  m.def("rmse", &rmse, py::arg("y_true"), py::arg("y_pred"));
  m.def("r2", &r2, py::arg("y_true"), py::arg("y_pred"));

  m.def(
      "preston_fit_csv",
      [](const std::filesystem::path& path) {
        PrestonModel p = preston_fit(load_runs(path));
        return p.k;
      },
      py::arg("path"));

  py::class_<Model>(m, "Model")
      .def(py::init([](std::size_t n_channels, std::size_t t_len, std::size_t patch_len,
                       std::size_t stride, std::size_t d_model, std::size_t n_heads,
                       std::size_t n_layers, std::size_t ffn_dim,
                       std::vector<std::size_t> head_dims, const std::string& activation,
                       std::uint64_t seed) {
             return Model(config_from_kwargs(n_channels, t_len, patch_len, stride, d_model,
                                             n_heads, n_layers, ffn_dim, std::move(head_dims),
                                             activation, seed));
           }),
           py::arg("n_channels") = kNumChannels, py::arg("t_len") = 128,
           py::arg("patch_len") = 16, py::arg("stride") = 8, py::arg("d_model") = 64,
           py::arg("n_heads") = 4, py::arg("n_layers") = 3, py::arg("ffn_dim") = 128,
           py::arg("head_dims") = std::vector<std::size_t>{1024, 512, 256, 128, 64, 32},
           py::arg("activation") = "relu", py::arg("seed") = 0)
      .def_static("load", &Model::load, py::arg("path"))
      .def("save", &Model::save, py::arg("path"))
      .def("content_hash", &Model::content_hash)
      .def_property_readonly("n_patches", [](const Model& m) { return m.config().n_patches(); })
      .def_property_readonly("flat_dim", [](const Model& m) { return m.config().flat_dim(); })
      .def("predict", &Model::predict_sample, py::arg("sample"))
      .def(
          "predict_many",
          [](const Model& m, const std::vector<SampleTensor>& samples) {
            return m.predict_batch(samples);
          },
          py::arg("samples"))
      .def(
          "forward",
          [](const Model& m, const SampleTensor& s, const py::object& hint, double lam) {
            auto h = hint_from_args(hint, lam);
            Model::ForwardResult r = m.forward(s, h ? &*h : nullptr, /*want_maps=*/true);
            py::list maps;
            for (const AttentionMap& am : r.maps) {
              py::dict d;
              d["layer"] = am.layer;
              d["head"] = am.head;
              d["channel"] = am.channel;
              d["scores"] = array_from_tensor(am.scores);
              if (am.hinted.size() > 0) d["hinted"] = array_from_tensor(am.hinted);
              maps.append(std::move(d));
            }
            return py::make_tuple(r.prediction, maps);
          },
          py::arg("sample"), py::arg("hint") = py::none(), py::arg("lambda_") = 0.1)
      .def(
          "saliency",
          [](const Model& m, const SampleTensor& s) {
            return array_from_tensor(saliency(m, s).values);
          },
          py::arg("sample"));

  m.def(
      "pretrain",
      [](Model& model, const std::vector<SampleTensor>& samples, double lr,
         std::size_t batch_size, std::size_t max_epochs, std::size_t patience,
         std::uint64_t seed) {
        TrainConfig cfg;
        cfg.lr_pretrain = lr;
        cfg.batch_size = batch_size;
        cfg.max_epochs = max_epochs;
        cfg.early_stop_patience = patience;
        cfg.seed = seed;
        PretrainResult r = pretrain(model, samples, cfg);
        py::dict d;
        d["train_loss"] = r.train_loss;
        d["val_loss"] = r.val_loss;
        d["best_epoch"] = r.best_epoch;
        return d;
      },
      py::arg("model"), py::arg("samples"), py::arg("lr") = 1e-3, py::arg("batch_size") = 16,
      py::arg("max_epochs") = 60, py::arg("patience") = 10, py::arg("seed") = 0);

  m.def(
      "finetune",
      [](Model& model, const SampleTensor& sample, const py::object& hint, double lam,
         std::size_t steps, double lr) {
        TrainConfig cfg;
        cfg.lr_finetune = lr;
        cfg.finetune_steps = steps;
        auto h = hint_from_args(hint, lam);
        ShotRecord rec = finetune_step(model, sample, h ? &*h : nullptr, cfg);
        return py::make_tuple(*rec.loss_before, *rec.loss_after);
      },
      py::arg("model"), py::arg("sample"), py::arg("hint") = py::none(),
      py::arg("lambda_") = 0.1, py::arg("steps") = 10, py::arg("lr") = 1e-4);

  m.def(
      "insight",
      [](const Model& model, const std::vector<SampleTensor>& samples, std::size_t k) {
        InsightBundle b = insight(model, samples, k);
        py::dict d;
        d["attention"] = array_from_tensor(b.attention_insight);
        d["saliency"] = array_from_tensor(b.saliency_insight);
        d["top_features"] = b.top_features;
        d["top_timesteps"] = b.top_timesteps;
        d["top_patches"] = b.top_patches;
        d["sample_ids"] = b.sample_ids;
        return d;
      },
      py::arg("model"), py::arg("samples"), py::arg("k") = 5);

  m.def(
      "heuristic_hint",
      [](const Model& model, const std::vector<SampleTensor>& samples, std::size_t k,
         double lam, std::size_t smooth_kernel) {
        HintParams params;
        params.lambda = lam;
        params.smooth_kernel = smooth_kernel;
        params.insight_k = k;
        AttentionHint h = heuristic_hint(insight(model, samples, k), params);
        return array_from_tensor(h.h);
      },
      py::arg("model"), py::arg("samples"), py::arg("k") = 5, py::arg("lambda_") = 0.1,
      py::arg("smooth_kernel") = 3);
}
