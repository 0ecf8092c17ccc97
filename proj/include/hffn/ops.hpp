#pragma once

// Tensor-core primitives. Every function is pure: inputs are never mutated.
// Backward helpers take the upstream gradient and return gradients with
// respect to the named argument.

#include <utility>
#include <vector>

#include "hffn/tensor.hpp"

namespace hffn::ops {

struct Conv2dGrads {
  Tensor input;
  Tensor weight;
  Tensor bias;
};

// Standard convolution. weight is (out_ch, in_ch, kH, kW), bias is
// (1, out_ch, 1, 1). Padding is zero-fill.
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, int stride,
              int padding);
Conv2dGrads conv2d_backward(const Tensor& grad_out, const Tensor& input, const Tensor& weight,
                            int stride, int padding);

// Transposed convolution. weight is (in_ch, out_ch, kH, kW); no padding.
// Output spatial size is (H - 1) * stride + kH.
Tensor conv_transpose2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
                        int stride);
Conv2dGrads conv_transpose2d_backward(const Tensor& grad_out, const Tensor& input,
                                      const Tensor& weight, int stride);

// Per-channel convolution. weight is (ch, 1, kH, kW), stride 1.
Tensor depthwise_conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
                        int padding);
Conv2dGrads depthwise_conv2d_backward(const Tensor& grad_out, const Tensor& input,
                                      const Tensor& weight, int padding);

Tensor avg_pool2d(const Tensor& input, int kernel, int stride);
Tensor avg_pool2d_backward(const Tensor& grad_out, const Shape& input_shape, int kernel,
                           int stride);

// out[b, c, h*r+i, w*r+j] = in[b, c*r*r + i*r + j, h, w]
Tensor pixel_shuffle(const Tensor& input, int r);
// Exact inverse of pixel_shuffle; also its adjoint.
Tensor pixel_unshuffle(const Tensor& input, int r);

std::pair<Tensor, Tensor> channel_split(const Tensor& input, int at);
Tensor channel_slice(const Tensor& input, int begin, int end);
Tensor channel_concat(const std::vector<Tensor>& parts);
Tensor channel_concat(std::initializer_list<const Tensor*> parts);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor sigmoid(const Tensor& a);
Tensor leaky_relu(const Tensor& a, double slope);

// Per-channel contrast statistic mean + sqrt(var + eps) over H x W,
// population variance. Output shape (B, C, 1, 1).
inline constexpr double kContrastEps = 1e-8;
Tensor channel_contrast(const Tensor& input);
Tensor channel_contrast_backward(const Tensor& grad_out, const Tensor& input);

// x (B,C,H,W) times gate (B,C,1,1) broadcast over H, W.
Tensor channel_scale(const Tensor& x, const Tensor& gate);

// Reflect-pad bottom/right by (pad_h, pad_w) rows/cols (each 0 or 1 in practice).
Tensor reflect_pad_br(const Tensor& input, int pad_h, int pad_w);
Tensor reflect_pad_br_backward(const Tensor& grad_out, int pad_h, int pad_w);
Tensor crop(const Tensor& input, int height, int width);
Tensor crop_backward(const Tensor& grad_out, const Shape& input_shape);

double sum(const Tensor& a);
double l1_mean(const Tensor& a, const Tensor& b);

/// Dihedral transform index k in [0, 8): rotate by 90*(k % 4) degrees
/// counter-clockwise, after a horizontal flip when k >= 4.
Tensor dihedral(const Tensor& input, int k);
Tensor dihedral_inverse(const Tensor& input, int k);

}  // namespace hffn::ops
