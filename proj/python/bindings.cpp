#include <pybind11/numpy.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "hffn/image.hpp"
#include "hffn/metrics.hpp"
#include "hffn/network.hpp"
#include "hffn/ops.hpp"
#include "hffn/training.hpp"

namespace py = pybind11;
using namespace hffn;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

// NCHW array <-> Tensor.
Tensor to_tensor(const Array& a, const char* name) {
  if (a.ndim() != 4) throw py::value_error(std::string(name) + ": expected a 4-D NCHW array");
  const Shape s{static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)), static_cast<int>(a.shape(2)),
                static_cast<int>(a.shape(3))};
  return Tensor(s, std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const Tensor& t) {
  Array out({t.batch(), t.channels(), t.height(), t.width()});
  std::copy(t.ptr(), t.ptr() + t.size(), out.mutable_data());
  return out;
}

// (H, W) or (H, W, C) array in [0, 1] <-> Image.
Image to_image(const Array& a, const char* name) {
  if (a.ndim() != 2 && a.ndim() != 3) throw py::value_error(std::string(name) + ": expected an (H, W) or (H, W, C) array");
  const int h = static_cast<int>(a.shape(0)), w = static_cast<int>(a.shape(1));
  const int c = a.ndim() == 3 ? static_cast<int>(a.shape(2)) : 1;
  if (c != 1 && c != 3) throw py::value_error(std::string(name) + ": expected 1 or 3 channels");
  Tensor t(Shape{1, c, h, w});
  const double* src = a.data();
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int ch = 0; ch < c; ++ch) t.at(0, ch, y, x) = src[(static_cast<std::size_t>(y) * w + x) * c + ch];
  return Image{std::move(t), c == 3 ? ColorSpace::rgb : ColorSpace::y};
}

Array from_image(const Image& img) {
  const int h = img.height(), w = img.width(), c = img.channels();
  Array out = c == 1 ? Array({h, w}) : Array({h, w, c});
  double* dst = out.mutable_data();
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int ch = 0; ch < c; ++ch) dst[(static_cast<std::size_t>(y) * w + x) * c + ch] = img.pixels.at(0, ch, y, x);
  return out;
}

py::dict groups(const std::vector<ParamGroup>& gs) {
  py::dict d;
  for (const ParamGroup& g : gs) d[py::str(g.path)] = g.count;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "High/low frequency fusion super-resolution network";

  auto numeric = py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);
  py::register_exception<TrainingError>(m, "TrainingError", numeric.ptr());
  py::register_exception<ImageIoError>(m, "ImageIoError", PyExc_OSError);
  py::register_exception<WeightFileError>(m, "WeightFileError", PyExc_ValueError);

  auto ops_mod = m.def_submodule("ops", "Tensor operations on NCHW float64 arrays");
  ops_mod.def(
      "conv2d",
      [](const Array& x, const Array& w, const Array& b, int stride, int padding) {
        return to_array(ops::conv2d(to_tensor(x, "x"), to_tensor(w, "weight"), to_tensor(b, "bias"), stride, padding));
      },
      py::arg("x"), py::arg("weight"), py::arg("bias"), py::arg("stride") = 1, py::arg("padding") = 0);
  ops_mod.def(
      "conv_transpose2d",
      [](const Array& x, const Array& w, const Array& b, int stride) {
        return to_array(ops::conv_transpose2d(to_tensor(x, "x"), to_tensor(w, "weight"), to_tensor(b, "bias"), stride));
      },
      py::arg("x"), py::arg("weight"), py::arg("bias"), py::arg("stride") = 1);
  ops_mod.def(
      "depthwise_conv2d",
      [](const Array& x, const Array& w, const Array& b, int padding) {
        return to_array(ops::depthwise_conv2d(to_tensor(x, "x"), to_tensor(w, "weight"), to_tensor(b, "bias"), padding));
      },
      py::arg("x"), py::arg("weight"), py::arg("bias"), py::arg("padding") = 0);
  ops_mod.def(
      "avg_pool2d", [](const Array& x, int k, int s) { return to_array(ops::avg_pool2d(to_tensor(x, "x"), k, s)); },
      py::arg("x"), py::arg("kernel"), py::arg("stride"));
  ops_mod.def(
      "pixel_shuffle", [](const Array& x, int r) { return to_array(ops::pixel_shuffle(to_tensor(x, "x"), r)); },
      py::arg("x"), py::arg("factor"));
  ops_mod.def(
      "channel_contrast", [](const Array& x) { return to_array(ops::channel_contrast(to_tensor(x, "x"))); },
      py::arg("x"), "Per-channel standard deviation plus mean, shape (B, C, 1, 1)");

  py::class_<ModelConfig>(m, "ModelConfig")
      .def(py::init([](int scale, int channels, int n_lffb, int m_hffb, int cca_reduction, const std::string& ablation) {
             ModelConfig c{scale, channels, n_lffb, m_hffb, cca_reduction, parse_ablation(ablation)};
             c.validate();
             return c;
           }),
           py::arg("scale") = 4, py::arg("channels") = 48, py::arg("n_lffb") = 6, py::arg("m_hffb") = 5,
           py::arg("cca_reduction") = 4, py::arg("ablation") = "full")
      .def_readonly("scale", &ModelConfig::scale)
      .def_readonly("channels", &ModelConfig::channels)
      .def_readonly("n_lffb", &ModelConfig::n_lffb)
      .def_readonly("m_hffb", &ModelConfig::m_hffb)
      .def_readonly("cca_reduction", &ModelConfig::cca_reduction)
      .def_property_readonly("ablation", [](const ModelConfig& c) { return ablation_name(c.ablation); })
      .def_property_readonly("fingerprint", &ModelConfig::fingerprint)
      .def("__str__", &ModelConfig::canonical)
      .def("__repr__", [](const ModelConfig& c) { return "ModelConfig(" + c.canonical() + ")"; })
      .def(py::self == py::self);

  py::class_<Model>(m, "Model")
      .def(py::init([](const ModelConfig& c, std::uint64_t seed) { return Model::build(c, seed); }),
           py::arg("config") = ModelConfig{}, py::arg("seed") = 0)
      .def_static("load", &load_weights, py::arg("config"), py::arg("path"))
      .def("save", [](const Model& self, const std::filesystem::path& p) { save_weights(self, p); }, py::arg("path"))
      .def_property_readonly("config", &Model::config)
      .def_property_readonly("hffb_count", &Model::hffb_count)
      .def(
          "forward",
          [](const Model& self, const Array& lr) {
            const Tensor x = to_tensor(lr, "lr");
            Tensor y;
            {
              py::gil_scoped_release release;
              y = self.forward(x);
            }
            return to_array(y);
          },
          py::arg("lr"), "LR batch (B, 3, H, W) in [0, 1] to SR (B, 3, H*s, W*s)")
      .def(
          "self_ensemble_forward",
          [](const Model& self, const Array& lr) {
            const Tensor x = to_tensor(lr, "lr");
            Tensor y;
            {
              py::gil_scoped_release release;
              y = self.self_ensemble_forward(x);
            }
            return to_array(y);
          },
          py::arg("lr"))
      .def("param_count",
           [](const Model& self) {
             const ParamBreakdown b = self.param_count();
             py::dict d;
             d["total"] = b.total;
             d["modules"] = groups(b.modules);
             d["hffb_parts"] = groups(b.hffb_parts);
             return d;
           })
      .def("multi_adds", &Model::multi_adds, py::arg("out_h"), py::arg("out_w"),
           "Multiply-accumulates for one image with the given SR output size");

  m.def("load_png", [](const std::filesystem::path& p) { return from_image(load_png(p)); }, py::arg("path"));
  m.def(
      "save_png", [](const std::filesystem::path& p, const Array& a) { save_png(to_image(a, "image"), p); },
      py::arg("path"), py::arg("image"));
  m.def("rgb_to_y", [](const Array& a) { return from_image(rgb_to_y(to_image(a, "image"))); }, py::arg("image"));
  m.def(
      "bicubic_resize",
      [](const Array& a, int num, int den) { return from_image(bicubic_resize(to_image(a, "image"), Rational{num, den})); },
      py::arg("image"), py::arg("num"), py::arg("den") = 1);
  m.def(
      "psnr", [](const Array& a, const Array& b, int shave) { return psnr(to_image(a, "a"), to_image(b, "b"), shave); },
      py::arg("a"), py::arg("b"), py::arg("shave") = 0);
  m.def("ssim", [](const Array& a, const Array& b) { return ssim(to_image(a, "a"), to_image(b, "b")); }, py::arg("a"),
        py::arg("b"));
  m.def(
      "synthetic_image", [](int h, int w, std::uint64_t seed) { return from_image(synthetic_image(h, w, seed)); },
      py::arg("height"), py::arg("width"), py::arg("seed") = 0);

  m.def(
      "decompose",
      [](const Model& model, const Array& image, int block) {
        const Decomposition d = decompose(to_image(image, "image"), model, block);
        py::dict out;
        out["low_map"] = from_image(d.low_map);
        out["high_map"] = from_image(d.high_map);
        out["input"] = to_array(d.input);
        out["low"] = to_array(d.low);
        out["high"] = to_array(d.high);
        out["high_max_abs"] = d.high_max_abs;
        return out;
      },
      py::arg("model"), py::arg("image"), py::arg("block"),
      "Low/high frequency maps inside one HFFB's high-frequency branch");

  m.def(
      "train_toy",
      [](Model& model, const std::vector<Array>& hr_images, int steps, int batch, int patch, double lr,
         std::uint64_t seed, bool augment) {
        std::vector<ImagePair> pairs;
        for (const Array& a : hr_images) pairs.push_back(make_pair(to_image(a, "hr_images"), model.config().scale));
        TrainConfig tc;
        tc.steps = steps;
        tc.batch = batch;
        tc.patch = patch;
        tc.lr_init = lr;
        tc.seed = seed;
        tc.augment = augment;
        tc.validate();
        py::gil_scoped_release release;
        return train_toy(model, pairs, tc).loss_curve;
      },
      py::arg("model"), py::arg("hr_images"), py::arg("steps") = 500, py::arg("batch") = 4, py::arg("patch") = 48,
      py::arg("lr") = 6e-4, py::arg("seed") = 0, py::arg("augment") = true,
      "L1/Adam training on crops of bicubic-degraded HR images; returns the per-step loss");
}
