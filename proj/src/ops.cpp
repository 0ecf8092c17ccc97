#include "hffn/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

namespace hffn::ops {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

struct Geometry {
  int channels, height, width;  // image being unfolded
  int kh, kw, stride, pad;
  int out_h, out_w;             // sliding-window grid
  int rows() const { return channels * kh * kw; }
  int cols() const { return out_h * out_w; }
  bool trivial() const { return kh == 1 && kw == 1 && stride == 1 && pad == 0; }
};

// cols[(c*kh + i)*kw + j][oh*out_w + ow] = img[c][oh*stride - pad + i][ow*stride - pad + j]
void im2col(const double* img, const Geometry& g, double* cols) {
  for (int c = 0; c < g.channels; ++c) {
    const double* plane = img + static_cast<std::size_t>(c) * g.height * g.width;
    for (int i = 0; i < g.kh; ++i) {
      for (int j = 0; j < g.kw; ++j) {
        double* row = cols + static_cast<std::size_t>((c * g.kh + i) * g.kw + j) * g.cols();
        for (int oh = 0; oh < g.out_h; ++oh) {
          const int h = oh * g.stride - g.pad + i;
          double* dst = row + static_cast<std::size_t>(oh) * g.out_w;
          if (h < 0 || h >= g.height) {
            std::fill(dst, dst + g.out_w, 0.0);
            continue;
          }
          const double* src = plane + static_cast<std::size_t>(h) * g.width;
          for (int ow = 0; ow < g.out_w; ++ow) {
            const int w = ow * g.stride - g.pad + j;
            dst[ow] = (w >= 0 && w < g.width) ? src[w] : 0.0;
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-add columns back into a zeroed image.
void col2im(const double* cols, const Geometry& g, double* img) {
  for (int c = 0; c < g.channels; ++c) {
    double* plane = img + static_cast<std::size_t>(c) * g.height * g.width;
    for (int i = 0; i < g.kh; ++i) {
      for (int j = 0; j < g.kw; ++j) {
        const double* row =
            cols + static_cast<std::size_t>((c * g.kh + i) * g.kw + j) * g.cols();
        for (int oh = 0; oh < g.out_h; ++oh) {
          const int h = oh * g.stride - g.pad + i;
          if (h < 0 || h >= g.height) continue;
          const double* src = row + static_cast<std::size_t>(oh) * g.out_w;
          double* dst = plane + static_cast<std::size_t>(h) * g.width;
          for (int ow = 0; ow < g.out_w; ++ow) {
            const int w = ow * g.stride - g.pad + j;
            if (w >= 0 && w < g.width) dst[w] += src[ow];
          }
        }
      }
    }
  }
}

void check_bias(const Tensor& bias, int out_ch, const char* op) {
  require_shape(bias.shape() == Shape{1, out_ch, 1, 1}, op,
                "bias must have shape (1," + std::to_string(out_ch) + ",1,1), got " +
                    bias.shape().str());
}

void add_bias(Tensor& out, const Tensor& bias) {
  for (int b = 0; b < out.batch(); ++b) {
    for (int c = 0; c < out.channels(); ++c) {
      double* p = out.plane(b, c);
      const double v = bias[c];
      for (std::size_t k = 0; k < out.shape().plane(); ++k) p[k] += v;
    }
  }
}

Tensor bias_grad(const Tensor& grad_out) {
  Tensor g(Shape{1, grad_out.channels(), 1, 1});
  for (int b = 0; b < grad_out.batch(); ++b) {
    for (int c = 0; c < grad_out.channels(); ++c) {
      const double* p = grad_out.plane(b, c);
      double acc = 0.0;
      for (std::size_t k = 0; k < grad_out.shape().plane(); ++k) acc += p[k];
      g[c] += acc;
    }
  }
  return g;
}

Geometry conv_geometry(const Tensor& input, const Tensor& weight, int stride, int padding,
                       const char* op) {
  require_shape(stride >= 1, op, "stride must be positive, got " + std::to_string(stride));
  require_shape(padding >= 0, op, "padding must be non-negative");
  require_shape(input.channels() == weight.channels(), op,
                "input has " + std::to_string(input.channels()) +
                    " channels but kernel expects " + std::to_string(weight.channels()));
  Geometry g{input.channels(), input.height(), input.width(), weight.height(), weight.width(),
             stride, padding, 0, 0};
  const int span_h = input.height() + 2 * padding - g.kh;
  const int span_w = input.width() + 2 * padding - g.kw;
  require_shape(span_h >= 0 && span_w >= 0, op,
                "kernel " + weight.shape().str() + " larger than padded input " +
                    input.shape().str());
  g.out_h = span_h / stride + 1;
  g.out_w = span_w / stride + 1;
  return g;
}

void require_same(const Tensor& a, const Tensor& b, const char* op) {
  require_shape(a.shape() == b.shape(), op,
                "shape mismatch " + a.shape().str() + " vs " + b.shape().str());
}

template <class F>
Tensor map_unary(const Tensor& a, F f) {
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i]);
  return out;
}

template <class F>
Tensor map_binary(const Tensor& a, const Tensor& b, const char* op, F f) {
  require_same(a, b, op);
  Tensor out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i], b[i]);
  return out;
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, int stride,
              int padding) {
  const Geometry g = conv_geometry(input, weight, stride, padding, "conv2d");
  const int out_ch = weight.batch();
  check_bias(bias, out_ch, "conv2d");

  Tensor out(Shape{input.batch(), out_ch, g.out_h, g.out_w});
  std::vector<double> cols(g.trivial() ? 0 : static_cast<std::size_t>(g.rows()) * g.cols());
  ConstMatMap w(weight.ptr(), out_ch, g.rows());
  for (int b = 0; b < input.batch(); ++b) {
    const double* src = input.plane(b, 0);
    if (!g.trivial()) {
      im2col(src, g, cols.data());
      src = cols.data();
    }
    MatMap(out.plane(b, 0), out_ch, g.cols()).noalias() =
        w * ConstMatMap(src, g.rows(), g.cols());
  }
  add_bias(out, bias);
  return out;
}

Conv2dGrads conv2d_backward(const Tensor& grad_out, const Tensor& input, const Tensor& weight,
                            int stride, int padding) {
  const Geometry g = conv_geometry(input, weight, stride, padding, "conv2d_backward");
  const int out_ch = weight.batch();
  require_shape(grad_out.shape() == Shape{input.batch(), out_ch, g.out_h, g.out_w},
                "conv2d_backward", "unexpected upstream gradient shape " +
                                       grad_out.shape().str());

  Conv2dGrads grads{Tensor(input.shape()), Tensor(weight.shape()), bias_grad(grad_out)};
  std::vector<double> cols(static_cast<std::size_t>(g.rows()) * g.cols());
  ConstMatMap w(weight.ptr(), out_ch, g.rows());
  MatMap gw(grads.weight.ptr(), out_ch, g.rows());
  for (int b = 0; b < input.batch(); ++b) {
    ConstMatMap gy(grad_out.plane(b, 0), out_ch, g.cols());
    if (g.trivial()) {
      ConstMatMap x(input.plane(b, 0), g.rows(), g.cols());
      gw.noalias() += gy * x.transpose();
      MatMap(grads.input.plane(b, 0), g.rows(), g.cols()).noalias() = w.transpose() * gy;
      continue;
    }
    im2col(input.plane(b, 0), g, cols.data());
    MatMap c(cols.data(), g.rows(), g.cols());
    gw.noalias() += gy * c.transpose();
    c.noalias() = w.transpose() * gy;
    col2im(cols.data(), g, grads.input.plane(b, 0));
  }
  return grads;
}

Tensor conv_transpose2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
                        int stride) {
  require_shape(stride >= 1, "conv_transpose2d", "stride must be positive");
  require_shape(input.channels() == weight.batch(), "conv_transpose2d",
                "input has " + std::to_string(input.channels()) +
                    " channels but kernel expects " + std::to_string(weight.batch()));
  const int out_ch = weight.channels();
  check_bias(bias, out_ch, "conv_transpose2d");
  const int out_h = (input.height() - 1) * stride + weight.height();
  const int out_w = (input.width() - 1) * stride + weight.width();
  const Geometry g{out_ch, out_h, out_w, weight.height(), weight.width(), stride, 0,
                   input.height(), input.width()};

  Tensor out(Shape{input.batch(), out_ch, out_h, out_w});
  std::vector<double> cols(static_cast<std::size_t>(g.rows()) * g.cols());
  ConstMatMap w(weight.ptr(), input.channels(), g.rows());
  for (int b = 0; b < input.batch(); ++b) {
    MatMap(cols.data(), g.rows(), g.cols()).noalias() =
        w.transpose() * ConstMatMap(input.plane(b, 0), input.channels(), g.cols());
    col2im(cols.data(), g, out.plane(b, 0));
  }
  add_bias(out, bias);
  return out;
}

Conv2dGrads conv_transpose2d_backward(const Tensor& grad_out, const Tensor& input,
                                      const Tensor& weight, int stride) {
  const int out_ch = weight.channels();
  const int out_h = (input.height() - 1) * stride + weight.height();
  const int out_w = (input.width() - 1) * stride + weight.width();
  require_shape(grad_out.shape() == Shape{input.batch(), out_ch, out_h, out_w},
                "conv_transpose2d_backward",
                "unexpected upstream gradient shape " + grad_out.shape().str());
  const Geometry g{out_ch, out_h, out_w, weight.height(), weight.width(), stride, 0,
                   input.height(), input.width()};

  Conv2dGrads grads{Tensor(input.shape()), Tensor(weight.shape()), bias_grad(grad_out)};
  std::vector<double> cols(static_cast<std::size_t>(g.rows()) * g.cols());
  ConstMatMap w(weight.ptr(), input.channels(), g.rows());
  MatMap gw(grads.weight.ptr(), input.channels(), g.rows());
  for (int b = 0; b < input.batch(); ++b) {
    im2col(grad_out.plane(b, 0), g, cols.data());
    ConstMatMap c(cols.data(), g.rows(), g.cols());
    ConstMatMap x(input.plane(b, 0), input.channels(), g.cols());
    gw.noalias() += x * c.transpose();
    MatMap(grads.input.plane(b, 0), input.channels(), g.cols()).noalias() = w * c;
  }
  return grads;
}

Tensor depthwise_conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
                        int padding) {
  require_shape(weight.channels() == 1 && weight.batch() == input.channels(),
                "depthwise_conv2d",
                "kernel " + weight.shape().str() + " needs one (1,kH,kW) slice per input channel (" +
                    std::to_string(input.channels()) + ")");
  check_bias(bias, input.channels(), "depthwise_conv2d");
  require_shape(padding >= 0, "depthwise_conv2d", "padding must be non-negative");
  const int kh = weight.height(), kw = weight.width();
  const int out_h = input.height() + 2 * padding - kh + 1;
  const int out_w = input.width() + 2 * padding - kw + 1;
  require_shape(out_h >= 1 && out_w >= 1, "depthwise_conv2d", "kernel larger than input");

  Tensor out(Shape{input.batch(), input.channels(), out_h, out_w});
  for (int b = 0; b < input.batch(); ++b) {
    for (int c = 0; c < input.channels(); ++c) {
      const double* src = input.plane(b, c);
      const double* k = weight.plane(c, 0);
      double* dst = out.plane(b, c);
      for (int oh = 0; oh < out_h; ++oh) {
        for (int ow = 0; ow < out_w; ++ow) {
          double acc = bias[c];
          for (int i = 0; i < kh; ++i) {
            const int h = oh - padding + i;
            if (h < 0 || h >= input.height()) continue;
            for (int j = 0; j < kw; ++j) {
              const int w = ow - padding + j;
              if (w < 0 || w >= input.width()) continue;
              acc += k[i * kw + j] * src[h * input.width() + w];
            }
          }
          dst[oh * out_w + ow] = acc;
        }
      }
    }
  }
  return out;
}

Conv2dGrads depthwise_conv2d_backward(const Tensor& grad_out, const Tensor& input,
                                      const Tensor& weight, int padding) {
  const int kh = weight.height(), kw = weight.width();
  const int out_h = grad_out.height(), out_w = grad_out.width();
  require_shape(grad_out.shape() == Shape{input.batch(), input.channels(),
                                          input.height() + 2 * padding - kh + 1,
                                          input.width() + 2 * padding - kw + 1},
                "depthwise_conv2d_backward", "unexpected upstream gradient shape");
  Conv2dGrads grads{Tensor(input.shape()), Tensor(weight.shape()), bias_grad(grad_out)};
  for (int b = 0; b < input.batch(); ++b) {
    for (int c = 0; c < input.channels(); ++c) {
      const double* src = input.plane(b, c);
      const double* k = weight.plane(c, 0);
      const double* gy = grad_out.plane(b, c);
      double* gx = grads.input.plane(b, c);
      double* gk = grads.weight.plane(c, 0);
      for (int oh = 0; oh < out_h; ++oh) {
        for (int ow = 0; ow < out_w; ++ow) {
          const double g = gy[oh * out_w + ow];
          for (int i = 0; i < kh; ++i) {
            const int h = oh - padding + i;
            if (h < 0 || h >= input.height()) continue;
            for (int j = 0; j < kw; ++j) {
              const int w = ow - padding + j;
              if (w < 0 || w >= input.width()) continue;
              gk[i * kw + j] += g * src[h * input.width() + w];
              gx[h * input.width() + w] += g * k[i * kw + j];
            }
          }
        }
      }
    }
  }
  return grads;
}

Tensor avg_pool2d(const Tensor& input, int kernel, int stride) {
  require_shape(kernel >= 1 && stride >= 1, "avg_pool2d", "kernel and stride must be positive");
  require_shape(input.height() >= kernel && input.width() >= kernel, "avg_pool2d",
                "window larger than input " + input.shape().str());
  if (kernel == stride) {
    require_shape(input.height() % stride == 0 && input.width() % stride == 0, "avg_pool2d",
                  "spatial dims of " + input.shape().str() + " not divisible by " +
                      std::to_string(stride));
  }
  const int out_h = (input.height() - kernel) / stride + 1;
  const int out_w = (input.width() - kernel) / stride + 1;
  const double inv = 1.0 / (static_cast<double>(kernel) * kernel);
  Tensor out(Shape{input.batch(), input.channels(), out_h, out_w});
  for (int b = 0; b < input.batch(); ++b) {
    for (int c = 0; c < input.channels(); ++c) {
      const double* src = input.plane(b, c);
      double* dst = out.plane(b, c);
      for (int oh = 0; oh < out_h; ++oh) {
        for (int ow = 0; ow < out_w; ++ow) {
          // Row sums first, then across rows: keeps 2x2 means of equal values exact.
          double acc = 0.0;
          for (int i = 0; i < kernel; ++i) {
            const double* row = src + static_cast<std::size_t>(oh * stride + i) * input.width() +
                                ow * stride;
            double r = 0.0;
            for (int j = 0; j < kernel; ++j) r += row[j];
            acc += r;
          }
          dst[oh * out_w + ow] = acc * inv;
        }
      }
    }
  }
  return out;
}

Tensor avg_pool2d_backward(const Tensor& grad_out, const Shape& input_shape, int kernel,
                           int stride) {
  Tensor gx(input_shape);
  const double inv = 1.0 / (static_cast<double>(kernel) * kernel);
  for (int b = 0; b < grad_out.batch(); ++b) {
    for (int c = 0; c < grad_out.channels(); ++c) {
      const double* gy = grad_out.plane(b, c);
      double* dst = gx.plane(b, c);
      for (int oh = 0; oh < grad_out.height(); ++oh) {
        for (int ow = 0; ow < grad_out.width(); ++ow) {
          const double g = gy[oh * grad_out.width() + ow] * inv;
          for (int i = 0; i < kernel; ++i) {
            double* row = dst + static_cast<std::size_t>(oh * stride + i) * input_shape.width +
                          ow * stride;
            for (int j = 0; j < kernel; ++j) row[j] += g;
          }
        }
      }
    }
  }
  return gx;
}

Tensor pixel_shuffle(const Tensor& input, int r) {
  require_shape(r >= 1, "pixel_shuffle", "upscale factor must be positive");
  require_shape(input.channels() % (r * r) == 0, "pixel_shuffle",
                std::to_string(input.channels()) + " channels not divisible by r^2 = " +
                    std::to_string(r * r));
  const int out_c = input.channels() / (r * r);
  Tensor out(Shape{input.batch(), out_c, input.height() * r, input.width() * r});
  for (int b = 0; b < input.batch(); ++b) {
    for (int c = 0; c < out_c; ++c) {
      for (int i = 0; i < r; ++i) {
        for (int j = 0; j < r; ++j) {
          const double* src = input.plane(b, c * r * r + i * r + j);
          for (int h = 0; h < input.height(); ++h) {
            for (int w = 0; w < input.width(); ++w) {
              out.at(b, c, h * r + i, w * r + j) = src[h * input.width() + w];
            }
          }
        }
      }
    }
  }
  return out;
}

Tensor pixel_unshuffle(const Tensor& input, int r) {
  require_shape(r >= 1, "pixel_unshuffle", "factor must be positive");
  require_shape(input.height() % r == 0 && input.width() % r == 0, "pixel_unshuffle",
                "spatial dims of " + input.shape().str() + " not divisible by " +
                    std::to_string(r));
  const int in_h = input.height() / r, in_w = input.width() / r;
  Tensor out(Shape{input.batch(), input.channels() * r * r, in_h, in_w});
  for (int b = 0; b < input.batch(); ++b) {
    for (int c = 0; c < input.channels(); ++c) {
      for (int i = 0; i < r; ++i) {
        for (int j = 0; j < r; ++j) {
          double* dst = out.plane(b, c * r * r + i * r + j);
          for (int h = 0; h < in_h; ++h) {
            for (int w = 0; w < in_w; ++w) {
              dst[h * in_w + w] = input.at(b, c, h * r + i, w * r + j);
            }
          }
        }
      }
    }
  }
  return out;
}

Tensor channel_slice(const Tensor& input, int begin, int end) {
  require_shape(0 <= begin && begin < end && end <= input.channels(), "channel_slice",
                "invalid range [" + std::to_string(begin) + "," + std::to_string(end) + ") of " +
                    std::to_string(input.channels()) + " channels");
  Tensor out(Shape{input.batch(), end - begin, input.height(), input.width()});
  const std::size_t plane = input.shape().plane();
  for (int b = 0; b < input.batch(); ++b) {
    std::copy_n(input.plane(b, begin), plane * (end - begin), out.plane(b, 0));
  }
  return out;
}

std::pair<Tensor, Tensor> channel_split(const Tensor& input, int at) {
  require_shape(0 < at && at < input.channels(), "channel_split",
                "split point " + std::to_string(at) + " outside (0, " +
                    std::to_string(input.channels()) + ")");
  return {channel_slice(input, 0, at), channel_slice(input, at, input.channels())};
}

Tensor channel_concat(const std::vector<Tensor>& parts) {
  require_shape(!parts.empty(), "channel_concat", "no inputs");
  const Shape& first = parts.front().shape();
  int channels = 0;
  for (const Tensor& p : parts) {
    require_shape(p.batch() == first.batch && p.height() == first.height &&
                      p.width() == first.width,
                  "channel_concat",
                  "mismatched batch/spatial dims " + p.shape().str() + " vs " + first.str());
    channels += p.channels();
  }
  Tensor out(Shape{first.batch, channels, first.height, first.width});
  const std::size_t plane = first.plane();
  for (int b = 0; b < first.batch; ++b) {
    double* dst = out.plane(b, 0);
    for (const Tensor& p : parts) {
      dst = std::copy_n(p.plane(b, 0), plane * p.channels(), dst);
    }
  }
  return out;
}

Tensor channel_concat(std::initializer_list<const Tensor*> parts) {
  std::vector<Tensor> copies;
  copies.reserve(parts.size());
  for (const Tensor* p : parts) copies.push_back(*p);
  return channel_concat(copies);
}

Tensor add(const Tensor& a, const Tensor& b) {
  return map_binary(a, b, "add", [](double x, double y) { return x + y; });
}
Tensor sub(const Tensor& a, const Tensor& b) {
  return map_binary(a, b, "sub", [](double x, double y) { return x - y; });
}
Tensor mul(const Tensor& a, const Tensor& b) {
  return map_binary(a, b, "mul", [](double x, double y) { return x * y; });
}
Tensor scale(const Tensor& a, double factor) {
  return map_unary(a, [factor](double x) { return x * factor; });
}
Tensor sigmoid(const Tensor& a) {
  return map_unary(a, [](double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  });
}
Tensor leaky_relu(const Tensor& a, double slope) {
  return map_unary(a, [slope](double x) { return x >= 0 ? x : slope * x; });
}

Tensor channel_contrast(const Tensor& input) {
  Tensor out(Shape{input.batch(), input.channels(), 1, 1});
  const std::size_t n = input.shape().plane();
  for (int b = 0; b < input.batch(); ++b) {
    for (int c = 0; c < input.channels(); ++c) {
      const double* p = input.plane(b, c);
      double mean = 0.0;
      for (std::size_t k = 0; k < n; ++k) mean += p[k];
      mean /= static_cast<double>(n);
      double var = 0.0;
      for (std::size_t k = 0; k < n; ++k) var += (p[k] - mean) * (p[k] - mean);
      var /= static_cast<double>(n);
      out.at(b, c, 0, 0) = mean + std::sqrt(var + kContrastEps);
    }
  }
  return out;
}

Tensor channel_contrast_backward(const Tensor& grad_out, const Tensor& input) {
  // d/dx_k [mean + sqrt(var + eps)] = 1/n + (x_k - mean) / (n * sqrt(var + eps))
  Tensor gx(input.shape());
  const std::size_t n = input.shape().plane();
  const double inv_n = 1.0 / static_cast<double>(n);
  for (int b = 0; b < input.batch(); ++b) {
    for (int c = 0; c < input.channels(); ++c) {
      const double* p = input.plane(b, c);
      double mean = 0.0;
      for (std::size_t k = 0; k < n; ++k) mean += p[k];
      mean *= inv_n;
      double var = 0.0;
      for (std::size_t k = 0; k < n; ++k) var += (p[k] - mean) * (p[k] - mean);
      var *= inv_n;
      const double sd = std::sqrt(var + kContrastEps);
      const double g = grad_out.at(b, c, 0, 0);
      double* dst = gx.plane(b, c);
      for (std::size_t k = 0; k < n; ++k) dst[k] = g * inv_n * (1.0 + (p[k] - mean) / sd);
    }
  }
  return gx;
}

Tensor channel_scale(const Tensor& x, const Tensor& gate) {
  require_shape(gate.shape() == Shape{x.batch(), x.channels(), 1, 1}, "channel_scale",
                "gate " + gate.shape().str() + " does not match " + x.shape().str());
  Tensor out(x.shape());
  const std::size_t n = x.shape().plane();
  for (int b = 0; b < x.batch(); ++b) {
    for (int c = 0; c < x.channels(); ++c) {
      const double g = gate.at(b, c, 0, 0);
      const double* src = x.plane(b, c);
      double* dst = out.plane(b, c);
      for (std::size_t k = 0; k < n; ++k) dst[k] = src[k] * g;
    }
  }
  return out;
}

Tensor reflect_pad_br(const Tensor& input, int pad_h, int pad_w) {
  require_shape(pad_h >= 0 && pad_w >= 0 && pad_h < input.height() && pad_w < input.width(),
                "reflect_pad", "padding must be smaller than the input");
  const int h_in = input.height(), w_in = input.width();
  Tensor out(Shape{input.batch(), input.channels(), h_in + pad_h, w_in + pad_w});
  for (int b = 0; b < input.batch(); ++b) {
    for (int c = 0; c < input.channels(); ++c) {
      for (int h = 0; h < out.height(); ++h) {
        const int sh = h < h_in ? h : 2 * (h_in - 1) - h;
        for (int w = 0; w < out.width(); ++w) {
          const int sw = w < w_in ? w : 2 * (w_in - 1) - w;
          out.at(b, c, h, w) = input.at(b, c, sh, sw);
        }
      }
    }
  }
  return out;
}

Tensor reflect_pad_br_backward(const Tensor& grad_out, int pad_h, int pad_w) {
  const int h_in = grad_out.height() - pad_h, w_in = grad_out.width() - pad_w;
  Tensor gx(Shape{grad_out.batch(), grad_out.channels(), h_in, w_in});
  for (int b = 0; b < grad_out.batch(); ++b) {
    for (int c = 0; c < grad_out.channels(); ++c) {
      for (int h = 0; h < grad_out.height(); ++h) {
        const int sh = h < h_in ? h : 2 * (h_in - 1) - h;
        for (int w = 0; w < grad_out.width(); ++w) {
          const int sw = w < w_in ? w : 2 * (w_in - 1) - w;
          gx.at(b, c, sh, sw) += grad_out.at(b, c, h, w);
        }
      }
    }
  }
  return gx;
}

Tensor crop(const Tensor& input, int height, int width) {
  require_shape(height >= 1 && width >= 1 && height <= input.height() && width <= input.width(),
                "crop", "target larger than input " + input.shape().str());
  Tensor out(Shape{input.batch(), input.channels(), height, width});
  for (int b = 0; b < input.batch(); ++b) {
    for (int c = 0; c < input.channels(); ++c) {
      for (int h = 0; h < height; ++h) {
        std::copy_n(input.plane(b, c) + static_cast<std::size_t>(h) * input.width(), width,
                    out.plane(b, c) + static_cast<std::size_t>(h) * width);
      }
    }
  }
  return out;
}

Tensor crop_backward(const Tensor& grad_out, const Shape& input_shape) {
  Tensor gx(input_shape);
  for (int b = 0; b < grad_out.batch(); ++b) {
    for (int c = 0; c < grad_out.channels(); ++c) {
      for (int h = 0; h < grad_out.height(); ++h) {
        std::copy_n(grad_out.plane(b, c) + static_cast<std::size_t>(h) * grad_out.width(),
                    grad_out.width(),
                    gx.plane(b, c) + static_cast<std::size_t>(h) * input_shape.width);
      }
    }
  }
  return gx;
}

double sum(const Tensor& a) {
  double acc = 0.0;
  for (double v : a.data()) acc += v;
  return acc;
}

double l1_mean(const Tensor& a, const Tensor& b) {
  require_same(a, b, "l1_loss");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += std::abs(a[i] - b[i]);
  return acc / static_cast<double>(a.size());
}

namespace {

Tensor rot90_ccw(const Tensor& in) {
  const int h_in = in.height(), w_in = in.width();
  Tensor out(Shape{in.batch(), in.channels(), w_in, h_in});
  for (int b = 0; b < in.batch(); ++b) {
    for (int c = 0; c < in.channels(); ++c) {
      for (int i = 0; i < w_in; ++i) {
        for (int j = 0; j < h_in; ++j) out.at(b, c, i, j) = in.at(b, c, j, w_in - 1 - i);
      }
    }
  }
  return out;
}

Tensor flip_horizontal(const Tensor& in) {
  Tensor out(in.shape());
  for (int b = 0; b < in.batch(); ++b) {
    for (int c = 0; c < in.channels(); ++c) {
      for (int h = 0; h < in.height(); ++h) {
        for (int w = 0; w < in.width(); ++w) {
          out.at(b, c, h, w) = in.at(b, c, h, in.width() - 1 - w);
        }
      }
    }
  }
  return out;
}

}  // namespace

Tensor dihedral(const Tensor& input, int k) {
  require_shape(0 <= k && k < 8, "dihedral", "transform index must be in [0, 8)");
  Tensor out = k >= 4 ? flip_horizontal(input) : input;
  for (int i = 0; i < k % 4; ++i) out = rot90_ccw(out);
  return out;
}

Tensor dihedral_inverse(const Tensor& input, int k) {
  require_shape(0 <= k && k < 8, "dihedral_inverse", "transform index must be in [0, 8)");
  Tensor out = input;
  for (int i = 0; i < (4 - k % 4) % 4; ++i) out = rot90_ccw(out);
  return k >= 4 ? flip_horizontal(out) : out;
}

}  // namespace hffn::ops
