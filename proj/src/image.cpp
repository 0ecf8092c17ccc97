#include <algorithm>
#include <cmath>
#include <optional>

#include "hffn/image.hpp"
#include "hffn/network.hpp"

namespace hffn {

Image Image::from_tensor(Tensor t, ColorSpace cs) {
  for (double& v : t.data()) v = std::clamp(v, 0.0, 1.0);
  return Image{std::move(t), cs};
}

int quantize8(double v) {
  return static_cast<int>(std::floor(std::clamp(v, 0.0, 1.0) * 255.0 + 0.5));
}

Image rgb_to_y(const Image& image) {
  if (image.colorspace != ColorSpace::rgb || image.channels() != 3) {
    throw std::invalid_argument("rgb_to_y: expected a 3-channel RGB image");
  }
  Tensor y(Shape{1, 1, image.height(), image.width()});
  const double* r = image.pixels.plane(0, 0);
  const double* g = image.pixels.plane(0, 1);
  const double* b = image.pixels.plane(0, 2);
  for (std::size_t i = 0; i < y.size(); ++i) {
    y[i] = 16.0 / 255.0 + (65.738 * r[i] + 129.057 * g[i] + 25.064 * b[i]) / 256.0;
  }
  return Image::from_tensor(std::move(y), ColorSpace::y);
}

double cubic_kernel(double x) {
  constexpr double a = -0.5;
  const double ax = std::abs(x);
  if (ax <= 1.0) return ((a + 2.0) * ax - (a + 3.0)) * ax * ax + 1.0;
  if (ax < 2.0) return ((a * ax - 5.0 * a) * ax + 8.0 * a) * ax - 4.0 * a;
  return 0.0;
}

ResizeTaps resize_taps(int in_size, int out_size, double scale) {
  // Output sample u (0-based) sits at input coordinate (u + 0.5) / scale - 0.5.
  const bool antialias = scale < 1.0;
  const double support = antialias ? 2.0 / scale : 2.0;
  const double kscale = antialias ? scale : 1.0;
  ResizeTaps taps;
  taps.index.resize(out_size);
  taps.weight.resize(out_size);
  for (int u = 0; u < out_size; ++u) {
    const double center = (u + 0.5) / scale - 0.5;
    const int lo = static_cast<int>(std::floor(center - support));
    const int hi = static_cast<int>(std::ceil(center + support));
    double total = 0.0;
    for (int k = lo; k <= hi; ++k) {
      const double w = kscale * cubic_kernel(kscale * (center - k));
      if (w == 0.0) continue;
      taps.index[u].push_back(std::clamp(k, 0, in_size - 1));
      taps.weight[u].push_back(w);
      total += w;
    }
    for (double& w : taps.weight[u]) w /= total;
  }
  return taps;
}

Image bicubic_resize(const Image& image, Rational factor) {
  if (factor.num < 1 || factor.den < 1) {
    throw std::invalid_argument("bicubic_resize: factor must be positive");
  }
  if (factor.num == factor.den) return image;
  const double scale = factor.value();
  const auto out_size = [&](int n) {
    return static_cast<int>((static_cast<long long>(n) * factor.num + factor.den - 1) / factor.den);
  };
  const int out_h = out_size(image.height());
  const int out_w = out_size(image.width());
  if (out_h < 1 || out_w < 1) {
    throw std::invalid_argument("bicubic_resize: degenerate output size");
  }
  const ResizeTaps th = resize_taps(image.height(), out_h, scale);
  const ResizeTaps tw = resize_taps(image.width(), out_w, scale);

  const int c_count = image.channels();
  Tensor horiz(Shape{1, c_count, image.height(), out_w});
  for (int c = 0; c < c_count; ++c) {
    for (int h = 0; h < image.height(); ++h) {
      const double* src = image.pixels.plane(0, c) + static_cast<std::size_t>(h) * image.width();
      for (int u = 0; u < out_w; ++u) {
        double acc = 0.0;
        for (std::size_t k = 0; k < tw.index[u].size(); ++k) acc += tw.weight[u][k] * src[tw.index[u][k]];
        horiz.at(0, c, h, u) = acc;
      }
    }
  }
  Tensor out(Shape{1, c_count, out_h, out_w});
  for (int c = 0; c < c_count; ++c) {
    for (int v = 0; v < out_h; ++v) {
      for (int u = 0; u < out_w; ++u) {
        double acc = 0.0;
        for (std::size_t k = 0; k < th.index[v].size(); ++k) {
          acc += th.weight[v][k] * horiz.at(0, c, th.index[v][k], u);
        }
        out.at(0, c, v, u) = acc;
      }
    }
  }
  return Image::from_tensor(std::move(out), image.colorspace);
}

Image crop_to_multiple(const Image& image, int scale) {
  const int h = image.height() - image.height() % scale;
  const int w = image.width() - image.width() % scale;
  if (h < 1 || w < 1) throw std::invalid_argument("crop_to_multiple: image smaller than scale");
  if (h == image.height() && w == image.width()) return image;
  return Image{ops::crop(image.pixels, h, w), image.colorspace};
}

ImagePair make_pair(const Image& hr, int scale, std::string name) {
  Image cropped = crop_to_multiple(hr, scale);
  Image lr = bicubic_resize(cropped, Rational{1, scale});
  return ImagePair{std::move(lr), std::move(cropped), scale, std::move(name)};
}

namespace {

Tensor channel_mean_abs(const Tensor& t, int height, int width) {
  Tensor out(Shape{1, 1, height, width});
  for (int c = 0; c < t.channels(); ++c) {
    for (int h = 0; h < height; ++h) {
      for (int w = 0; w < width; ++w) out.at(0, 0, h, w) += std::abs(t.at(0, c, h, w));
    }
  }
  return ops::scale(out, 1.0 / t.channels());
}

Image min_max_normalize(Tensor t) {
  const auto [lo, hi] = std::minmax_element(t.data().begin(), t.data().end());
  const double min = *lo, range = *hi - *lo;
  for (double& v : t.data()) v = range > 0 ? (v - min) / range : 0.0;
  return Image::from_tensor(std::move(t), ColorSpace::y);
}

}  // namespace

Decomposition decompose(const Image& image, const Model& model, int block_index) {
  if (block_index < 0 || static_cast<std::size_t>(block_index) >= model.hffb_count()) {
    throw std::out_of_range("decompose: block index " + std::to_string(block_index) +
                            " outside [0, " + std::to_string(model.hffb_count()) + ")");
  }
  if (!model.config().ablation.hfe) {
    throw std::invalid_argument("decompose: model has no HFE branch (no-hfe ablation)");
  }
  if (image.channels() != 3) throw std::invalid_argument("decompose: expected an RGB image");

  std::optional<Tensor> input, low, high;
  model.forward(image.pixels, [&](int block, std::string_view tag, const Tensor& v) {
    if (block != block_index) return;
    if (tag == probe::kHighInput) input = v;
    if (tag == probe::kLowFreq) low = v;
    if (tag == probe::kHighFreq) high = v;
  });
  Decomposition d;
  d.input = ops::crop(*input, image.height(), image.width());
  d.low = ops::crop(*low, image.height(), image.width());
  d.high = ops::crop(*high, image.height(), image.width());
  for (double v : d.high.data()) d.high_max_abs = std::max(d.high_max_abs, std::abs(v));
  d.low_map = min_max_normalize(channel_mean_abs(d.low, image.height(), image.width()));
  d.high_map = min_max_normalize(channel_mean_abs(d.high, image.height(), image.width()));
  return d;
}

}  // namespace hffn
