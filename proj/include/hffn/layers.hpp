#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "hffn/autodiff.hpp"
#include "hffn/ops.hpp"
#include "hffn/tensor.hpp"

namespace hffn {

using ParamId = std::size_t;

/// Named weight tensors in construction order. The order is part of the
/// weight-file format.
class ParameterStore {
 public:
  ParamId add(std::string name, Tensor value);

  const Tensor& operator[](ParamId id) const { return values_.at(id); }
  Tensor& operator[](ParamId id) { return values_.at(id); }
  const std::string& name(ParamId id) const { return names_.at(id); }
  /// Id of the tensor called `name`; throws std::out_of_range if absent.
  ParamId find(std::string_view name) const;
  std::size_t size() const { return values_.size(); }
  /// Total number of scalars across all tensors.
  std::size_t scalar_count() const;

  const std::vector<Tensor>& values() const { return values_; }
  std::vector<Tensor>& values() { return values_; }

  bool operator==(const ParameterStore&) const = default;

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> values_;
};

/// Static description of one convolution-type layer, used for Multi-Adds.
struct LayerInfo {
  enum class Kind { conv, depthwise, conv_transpose };
  /// full: runs on the LR feature grid; pooled: runs on a (1,1) statistic.
  enum class Grid { full, pooled };

  std::string path;
  Kind kind = Kind::conv;
  Grid grid = Grid::full;
  int in_ch = 0;
  int out_ch = 0;
  int kh = 0;
  int kw = 0;

  /// Multiply-accumulates for one image whose LR feature grid is h x w.
  std::uint64_t macs(int h, int w) const;
};

/// Collects parameters and layer descriptors while a model is constructed.
class LayerBuilder {
 public:
  LayerBuilder(ParameterStore& params, std::vector<LayerInfo>& layers, std::uint64_t seed);

  /// Kaiming-uniform weights for the given fan-in, rounded to single
  /// precision so that weight files reproduce them exactly.
  ParamId weight(const std::string& name, Shape shape, int fan_in);
  ParamId zeros(const std::string& name, Shape shape);
  void describe(LayerInfo info) { layers_.push_back(std::move(info)); }

  /// RAII scope appending a path component to parameter names.
  class Scope {
   public:
    Scope(LayerBuilder& b, std::string_view component);
    ~Scope();
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    LayerBuilder& b_;
    std::size_t prev_len_;
  };
  Scope scope(std::string_view component) { return Scope(*this, component); }
  std::string path(std::string_view leaf) const;

 private:
  ParameterStore& params_;
  std::vector<LayerInfo>& layers_;
  std::mt19937_64 rng_;
  std::string prefix_;
};

/// Callback invoked with intermediate block activations (block index, tag, value).
using Observer = std::function<void(int, std::string_view, const Tensor&)>;

/// Runs layers directly on tensors; no gradient bookkeeping.
class EagerContext {
 public:
  using Value = Tensor;

  explicit EagerContext(const ParameterStore& params, Observer observer = {})
      : params_(params), observer_(std::move(observer)) {}

  const Tensor& value(const Tensor& v) const { return v; }
  void observe(int block, std::string_view tag, const Tensor& v) const {
    if (observer_) observer_(block, tag, v);
  }

  Tensor conv2d(const Tensor& x, ParamId w, ParamId b, int stride, int padding) const {
    return ops::conv2d(x, params_[w], params_[b], stride, padding);
  }
  Tensor conv_transpose2d(const Tensor& x, ParamId w, ParamId b, int stride) const {
    return ops::conv_transpose2d(x, params_[w], params_[b], stride);
  }
  Tensor depthwise_conv2d(const Tensor& x, ParamId w, ParamId b, int padding) const {
    return ops::depthwise_conv2d(x, params_[w], params_[b], padding);
  }
  Tensor avg_pool2d(const Tensor& x, int k, int s) const { return ops::avg_pool2d(x, k, s); }
  Tensor pixel_shuffle(const Tensor& x, int r) const { return ops::pixel_shuffle(x, r); }
  Tensor channel_slice(const Tensor& x, int b, int e) const { return ops::channel_slice(x, b, e); }
  Tensor channel_concat(const std::vector<Tensor>& parts) const {
    return ops::channel_concat(parts);
  }
  Tensor add(const Tensor& a, const Tensor& b) const { return ops::add(a, b); }
  Tensor sub(const Tensor& a, const Tensor& b) const { return ops::sub(a, b); }
  Tensor mul(const Tensor& a, const Tensor& b) const { return ops::mul(a, b); }
  Tensor sigmoid(const Tensor& a) const { return ops::sigmoid(a); }
  Tensor leaky_relu(const Tensor& a, double slope) const { return ops::leaky_relu(a, slope); }
  Tensor channel_contrast(const Tensor& x) const { return ops::channel_contrast(x); }
  Tensor channel_scale(const Tensor& x, const Tensor& g) const { return ops::channel_scale(x, g); }
  Tensor reflect_pad_br(const Tensor& x, int ph, int pw) const {
    return ops::reflect_pad_br(x, ph, pw);
  }
  Tensor crop(const Tensor& x, int h, int w) const { return ops::crop(x, h, w); }

 private:
  const ParameterStore& params_;
  Observer observer_;
};

/// Records every op on a tape so that gradients can be taken.
class TapeContext {
 public:
  using Value = Var;

  /// `params[i]` is the tape variable standing in for ParamId i.
  TapeContext(Tape& tape, std::vector<Var> params, Observer observer = {})
      : tape_(tape), params_(std::move(params)), observer_(std::move(observer)) {}
  /// Registers every parameter as a leaf keyed by its ParamId.
  static TapeContext with_leaves(Tape& tape, const ParameterStore& params);

  Tape& tape() const { return tape_; }
  const Tensor& value(Var v) const { return tape_.value(v); }
  void observe(int block, std::string_view tag, Var v) const {
    if (observer_) observer_(block, tag, tape_.value(v));
  }

  Var conv2d(Var x, ParamId w, ParamId b, int stride, int padding) const {
    return ad::conv2d(x, params_.at(w), params_.at(b), stride, padding);
  }
  Var conv_transpose2d(Var x, ParamId w, ParamId b, int stride) const {
    return ad::conv_transpose2d(x, params_.at(w), params_.at(b), stride);
  }
  Var depthwise_conv2d(Var x, ParamId w, ParamId b, int padding) const {
    return ad::depthwise_conv2d(x, params_.at(w), params_.at(b), padding);
  }
  Var avg_pool2d(Var x, int k, int s) const { return ad::avg_pool2d(x, k, s); }
  Var pixel_shuffle(Var x, int r) const { return ad::pixel_shuffle(x, r); }
  Var channel_slice(Var x, int b, int e) const { return ad::channel_slice(x, b, e); }
  Var channel_concat(const std::vector<Var>& parts) const { return ad::channel_concat(parts); }
  Var add(Var a, Var b) const { return ad::add(a, b); }
  Var sub(Var a, Var b) const { return ad::sub(a, b); }
  Var mul(Var a, Var b) const { return ad::mul(a, b); }
  Var sigmoid(Var a) const { return ad::sigmoid(a); }
  Var leaky_relu(Var a, double slope) const { return ad::leaky_relu(a, slope); }
  Var channel_contrast(Var x) const { return ad::channel_contrast(x); }
  Var channel_scale(Var x, Var g) const { return ad::channel_scale(x, g); }
  Var reflect_pad_br(Var x, int ph, int pw) const { return ad::reflect_pad_br(x, ph, pw); }
  Var crop(Var x, int h, int w) const { return ad::crop(x, h, w); }

 private:
  Tape& tape_;
  std::vector<Var> params_;
  Observer observer_;
};

enum class Activation { none, leaky_relu, sigmoid };

/// Negative slope of every leaky ReLU in the network.
inline constexpr double kLeakySlope = 0.05;

template <class Ctx>
typename Ctx::Value activate(const Ctx& ctx, typename Ctx::Value x, Activation act) {
  switch (act) {
    case Activation::leaky_relu:
      return ctx.leaky_relu(x, kLeakySlope);
    case Activation::sigmoid:
      return ctx.sigmoid(x);
    case Activation::none:
      break;
  }
  return x;
}

/// Dense convolution with per-output-channel bias; "same" zero padding for
/// odd kernels at stride 1.
struct ConvLayer {
  ParamId weight = 0;
  ParamId bias = 0;
  int in_ch = 0;
  int out_ch = 0;
  int kernel = 1;
  int stride = 1;
  int padding = 0;
  Activation activation = Activation::none;

  static ConvLayer create(LayerBuilder& b, std::string_view name, int in_ch, int out_ch,
                          int kernel, Activation act = Activation::none,
                          LayerInfo::Grid grid = LayerInfo::Grid::full);

  template <class Ctx>
  typename Ctx::Value forward(const Ctx& ctx, const typename Ctx::Value& x) const {
    require_shape(ctx.value(x).channels() == in_ch, "ConvLayer",
                  "expected " + std::to_string(in_ch) + " input channels, got " +
                      std::to_string(ctx.value(x).channels()));
    return activate(ctx, ctx.conv2d(x, weight, bias, stride, padding), activation);
  }
};

/// 3x3 depthwise convolution followed by 1x1 pointwise convolution.
struct DSConv {
  ParamId depthwise_weight = 0;
  ParamId depthwise_bias = 0;
  ConvLayer pointwise;
  int channels = 0;

  static DSConv create(LayerBuilder& b, std::string_view name, int channels);

  template <class Ctx>
  typename Ctx::Value forward(const Ctx& ctx, const typename Ctx::Value& x) const {
    require_shape(ctx.value(x).channels() == channels, "DSConv",
                  "expected " + std::to_string(channels) + " channels, got " +
                      std::to_string(ctx.value(x).channels()));
    return pointwise.forward(ctx, ctx.depthwise_conv2d(x, depthwise_weight, depthwise_bias, 1));
  }
};

/// Contrast channel attention. The per-channel statistic mean + std feeds a
/// 1x1 reduce / leaky ReLU / 1x1 expand / sigmoid bottleneck whose output
/// rescales each channel.
struct CCA {
  ConvLayer reduce;
  ConvLayer expand;
  int channels = 0;
  int reduction = 4;

  static CCA create(LayerBuilder& b, std::string_view name, int channels, int reduction);

  template <class Ctx>
  typename Ctx::Value gate(const Ctx& ctx, const typename Ctx::Value& x) const {
    require_shape(ctx.value(x).channels() == channels, "CCA",
                  "expected " + std::to_string(channels) + " channels, got " +
                      std::to_string(ctx.value(x).channels()));
    return expand.forward(ctx, reduce.forward(ctx, ctx.channel_contrast(x)));
  }

  template <class Ctx>
  typename Ctx::Value forward(const Ctx& ctx, const typename Ctx::Value& x) const {
    return ctx.channel_scale(x, gate(ctx, x));
  }
};

/// 3x3 conv to 3*s*s channels followed by pixel shuffle.
struct ReconstructionHead {
  ConvLayer conv;
  int scale = 1;

  static ReconstructionHead create(LayerBuilder& b, std::string_view name, int channels,
                                   int scale);

  template <class Ctx>
  typename Ctx::Value forward(const Ctx& ctx, const typename Ctx::Value& x) const {
    return ctx.pixel_shuffle(conv.forward(ctx, x), scale);
  }
};

// Eager conveniences.
Tensor cca_forward(const Tensor& x, const CCA& layer, const ParameterStore& params);
Tensor dsconv_forward(const Tensor& x, const DSConv& layer, const ParameterStore& params);
Tensor reconstruct(const Tensor& x, const ReconstructionHead& head, const ParameterStore& params);

}  // namespace hffn
