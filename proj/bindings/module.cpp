#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>
#include <stdexcept>
#include <vector>

#include "stylet/attention.hpp"
#include "stylet/classifier.hpp"
#include "stylet/config.hpp"
#include "stylet/editing.hpp"
#include "stylet/encoder.hpp"
#include "stylet/generator.hpp"
#include "stylet/harness.hpp"
#include "stylet/io.hpp"
#include "stylet/metrics.hpp"
#include "stylet/rng.hpp"
#include "stylet/tensor.hpp"

namespace py = pybind11;
using namespace stylet;

namespace {

Tensor tensor_from_array(const py::array_t<double>& arr) {
    py::buffer_info info = arr.request();
    if (info.ndim != 2) throw std::invalid_argument("expected a 2-D float64 array");
    Tensor t({static_cast<std::size_t>(info.shape[0]), static_cast<std::size_t>(info.shape[1])});
    auto a = arr.unchecked<2>();
    for (py::ssize_t i = 0; i < info.shape[0]; ++i)
        for (py::ssize_t j = 0; j < info.shape[1]; ++j)
            t.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = a(i, j);
    return t;
}

py::array_t<double> array_from_tensor(const Tensor& t) {
    py::array_t<double> out({t.rows(), t.cols()});
    std::memcpy(out.mutable_data(), t.values().data(), t.numel() * sizeof(double));
    return out;
}

std::vector<Tensor> tensors_from(const std::vector<py::array_t<double>>& arrs) {
    std::vector<Tensor> out;
    out.reserve(arrs.size());
    for (const auto& a : arrs) out.push_back(tensor_from_array(a));
    return out;
}

}  // namespace

PYBIND11_MODULE(_stylet, m) {
    m.doc() = "style transformer inversion and editing core";

    py::class_<ModelConfig>(m, "ModelConfig")
        .def(py::init<>())
        .def_readwrite("n_styles", &ModelConfig::n_styles)
        .def_readwrite("dim", &ModelConfig::dim)
        .def_readwrite("heads", &ModelConfig::heads)
        .def_readwrite("ffn_inner", &ModelConfig::ffn_inner)
        .def_readwrite("embed_dim", &ModelConfig::embed_dim)
        .def_readwrite("n_attrs", &ModelConfig::n_attrs)
        .def_readwrite("mapper_layers", &ModelConfig::mapper_layers)
        .def_readwrite("img_size", &ModelConfig::img_size)
        .def_readwrite("img_channels", &ModelConfig::img_channels)
        .def_readwrite("gen_channels", &ModelConfig::gen_channels);

    py::class_<LossConfig>(m, "LossConfig")
        .def(py::init<>())
        .def_readwrite("lambda_l2", &LossConfig::lambda_l2)
        .def_readwrite("lambda_lpips", &LossConfig::lambda_lpips)
        .def_readwrite("lambda_id", &LossConfig::lambda_id)
        .def_readwrite("lambda_ref", &LossConfig::lambda_ref)
        .def_readwrite("lambda_keep", &LossConfig::lambda_keep)
        .def_readwrite("lambda_reg", &LossConfig::lambda_reg);

    py::class_<Config>(m, "Config")
        .def(py::init<>())
        .def_readwrite("seed", &Config::seed)
        .def_readwrite("generator_seed", &Config::generator_seed)
        .def_readwrite("data_seed", &Config::data_seed)
        .def_readwrite("model", &Config::model)
        .def_readwrite("loss", &Config::loss)
        .def_readwrite("out_dir", &Config::out_dir)
        .def("validate", &Config::validate)
        .def("hash", &Config::hash);

    py::class_<LatentDataset>(m, "LatentDataset")
        .def_property_readonly("codes",
                               [](const LatentDataset& ds) {
                                   std::vector<py::array_t<double>> out;
                                   for (const auto& c : ds.codes) out.push_back(array_from_tensor(c));
                                   return out;
                               })
        .def_property_readonly("images",
                               [](const LatentDataset& ds) {
                                   std::vector<py::array_t<double>> out;
                                   for (const auto& i : ds.images) out.push_back(array_from_tensor(i));
                                   return out;
                               })
        .def_readonly("labels", &LatentDataset::labels);

    py::class_<ToyGenerator>(m, "ToyGenerator")
        .def(py::init<const ModelConfig&, std::uint64_t>())
        .def("synthesize",
             [](const ToyGenerator& g, const py::array_t<double>& w) {
                 return array_from_tensor(g.synthesize(nullptr, tensor_from_array(w)));
             })
        .def("checksum", &ToyGenerator::checksum);

    m.def("sample_latent_dataset",
          [](const ToyGenerator& gen, const ModelConfig& cfg, std::size_t count,
             std::uint64_t seed, bool render_images) {
              return sample_latent_dataset(gen, cfg, count, seed, render_images);
          },
          py::arg("gen"), py::arg("cfg"), py::arg("count"), py::arg("seed"),
          py::arg("render_images") = true);

    py::class_<StyleEncoder>(m, "StyleEncoder")
        .def(py::init<const ModelConfig&, std::uint64_t>())
        .def("invert",
             [](const StyleEncoder& e, const py::array_t<double>& image, bool use_self) {
                 return array_from_tensor(e.invert(nullptr, tensor_from_array(image), use_self));
             },
             py::arg("image"), py::arg("use_self") = true);

    m.def("train_inversion",
          [](StyleEncoder& enc, const ToyGenerator& gen, std::uint64_t surrogate_seed,
             const std::vector<py::array_t<double>>& images, const Config& cfg,
             std::size_t steps, bool use_self) {
              SurrogateNets sur(cfg.model, surrogate_seed);
              return train_inversion(enc, gen, sur, tensors_from(images), cfg, steps, use_self)
                  .loss_curve;
          },
          py::arg("encoder"), py::arg("gen"), py::arg("surrogate_seed"), py::arg("images"),
          py::arg("cfg"), py::arg("steps"), py::arg("use_self") = true);

    py::class_<LatentClassifier>(m, "LatentClassifier")
        .def(py::init<const ModelConfig&, std::uint64_t>())
        .def("logits",
             [](const LatentClassifier& c, const py::array_t<double>& w) {
                 return array_from_tensor(c.logits(nullptr, tensor_from_array(w)));
             })
        .def("embed",
             [](const LatentClassifier& c, const py::array_t<double>& w, std::size_t k) {
                 return array_from_tensor(c.embed(nullptr, tensor_from_array(w), k));
             })
        .def("checksum", &LatentClassifier::checksum);

    m.def("train_classifier",
          [](LatentClassifier& clf, const LatentDataset& ds, std::size_t epochs, double lr,
             std::size_t batch_size) {
              return train_classifier(clf, ds, epochs, lr, batch_size).loss_per_epoch;
          },
          py::arg("classifier"), py::arg("dataset"), py::arg("epochs"), py::arg("lr"),
          py::arg("batch_size") = 8);

    m.def("classifier_accuracy",
          [](const LatentClassifier& clf, const LatentDataset& ds, std::size_t begin,
             std::size_t end) { return classifier_accuracy(clf, ds, begin, end); });

    m.def("first_order_direction",
          [](const py::array_t<double>& w, std::size_t k, double y_t,
             const LatentClassifier& clf, double alpha) {
              EditDirection d = first_order_direction(tensor_from_array(w), k, y_t, clf, alpha);
              return py::make_tuple(array_from_tensor(d.direction), d.alpha);
          },
          py::arg("w"), py::arg("k"), py::arg("target"), py::arg("classifier"),
          py::arg("alpha") = 0.5);

    m.def("second_order_direction",
          [](const py::array_t<double>& w, std::size_t k, double y_t,
             const LatentClassifier& clf, double xi, std::size_t iters, std::uint64_t seed,
             double alpha) {
              Rng rng(seed);
              EditDirection d =
                  second_order_direction(tensor_from_array(w), k, y_t, clf, xi, iters, rng, alpha);
              return py::make_tuple(array_from_tensor(d.direction), d.alpha);
          },
          py::arg("w"), py::arg("k"), py::arg("target"), py::arg("classifier"), py::arg("xi"),
          py::arg("iters"), py::arg("seed"), py::arg("alpha") = 0.5);

    m.def("apply_edit",
          [](const py::array_t<double>& w, const py::array_t<double>& direction, double alpha) {
              EditDirection d;
              d.direction = tensor_from_array(direction);
              d.alpha = alpha;
              return array_from_tensor(apply_edit(tensor_from_array(w), d));
          });

    py::class_<RefEditorParams>(m, "RefEditorParams")
        .def_property_readonly("wq", [](const RefEditorParams& p) { return array_from_tensor(p.wq); })
        .def_property_readonly("wk", [](const RefEditorParams& p) { return array_from_tensor(p.wk); })
        .def_property_readonly("wv", [](const RefEditorParams& p) { return array_from_tensor(p.wv); });

    m.def("train_reference_editor",
          [](const std::vector<py::array_t<double>>& sources,
             const std::vector<py::array_t<double>>& references, std::size_t k,
             const LatentClassifier& clf, const LossConfig& loss, std::size_t steps, double lr,
             std::uint64_t seed) {
              EditorTrainResult r = train_reference_editor(tensors_from(sources),
                                                           tensors_from(references), k, clf, loss,
                                                           steps, lr, seed);
              return py::make_tuple(r.editor, r.loss_curve, r.validation_start, r.validation_end);
          });

    m.def("reference_edit",
          [](const py::array_t<double>& w_src, const py::array_t<double>& w_ref,
             const RefEditorParams& editor) {
              ReferenceEditResult r =
                  reference_edit(nullptr, tensor_from_array(w_src), tensor_from_array(w_ref), editor);
              return py::make_tuple(array_from_tensor(r.edited), array_from_tensor(r.delta_w));
          });

    m.def("routing_attention",
          [](const py::array_t<double>& w_src, const py::array_t<double>& w_ref,
             const py::array_t<double>& wq, const py::array_t<double>& wk,
             const py::array_t<double>& wv) {
              RoutingDiagnostics diag;
              Tensor out = routing_attention(nullptr, tensor_from_array(w_src),
                                             tensor_from_array(w_ref), tensor_from_array(wq),
                                             tensor_from_array(wk), tensor_from_array(wv), &diag);
              return py::make_tuple(array_from_tensor(out), diag.row_sums_after);
          });

    m.def("mse", [](const py::array_t<double>& a, const py::array_t<double>& b) {
        return mse(tensor_from_array(a), tensor_from_array(b));
    });

    m.def("swd",
          [](const std::vector<std::vector<double>>& a, const std::vector<std::vector<double>>& b,
             std::size_t projections, std::uint64_t seed) { return swd(a, b, projections, seed); },
          py::arg("a"), py::arg("b"), py::arg("projections") = 128, py::arg("seed") = 0);

    m.def("mean_ad",
          [](const std::vector<py::array_t<double>>& codes, std::size_t k,
             std::vector<double> steps, const std::function<py::array_t<double>(
                 py::array_t<double>, double)>& editor,
             const std::function<std::vector<double>(py::array_t<double>)>& evaluator) {
              AttributeEvaluator eval = [&](const Tensor& w) {
                  return evaluator(array_from_tensor(w));
              };
              EditFn edit = [&](const Tensor& w, double alpha) {
                  return tensor_from_array(editor(array_from_tensor(w), alpha));
              };
              std::vector<Tensor> cs = tensors_from(codes);
              std::vector<double> sigma = logit_sigmas(eval, cs);
              ADReport r = mean_ad(cs, k, std::move(steps), edit, eval, sigma);
              return py::make_tuple(r.steps, r.target_change, r.mean_ad);
          });

    m.def("save_codes", [](const std::string& path, const std::vector<py::array_t<double>>& codes,
                           const std::vector<std::vector<int>>& labels) {
        CodeFile cf;
        cf.codes = tensors_from(codes);
        if (!cf.codes.empty()) {
            cf.n = cf.codes[0].rows();
            cf.d = cf.codes[0].cols();
        }
        cf.labels = labels;
        save_codes(path, cf);
    });

    m.def("load_codes", [](const std::string& path) {
        CodeFile cf = load_codes(path);
        std::vector<py::array_t<double>> codes;
        for (const auto& c : cf.codes) codes.push_back(array_from_tensor(c));
        return py::make_tuple(codes, cf.labels);
    });
}
