#include "hffn/layers.hpp"

#include <cmath>

namespace hffn {

ParamId ParameterStore::add(std::string name, Tensor value) {
  names_.push_back(std::move(name));
  values_.push_back(std::move(value));
  return values_.size() - 1;
}

ParamId ParameterStore::find(std::string_view name) const {
  for (ParamId i = 0; i < names_.size(); ++i) {
    if (names_[i] == name) return i;
  }
  throw std::out_of_range("no parameter named '" + std::string(name) + "'");
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const Tensor& t : values_) n += t.size();
  return n;
}

std::uint64_t LayerInfo::macs(int h, int w) const {
  const std::uint64_t grid =
      this->grid == Grid::pooled ? 1 : static_cast<std::uint64_t>(h) * static_cast<std::uint64_t>(w);
  const std::uint64_t taps = static_cast<std::uint64_t>(kh) * kw;
  switch (kind) {
    case Kind::conv:
      return grid * out_ch * in_ch * taps;
    case Kind::depthwise:
      return grid * out_ch * taps;
    case Kind::conv_transpose:
      // Every input pixel scatters kh*kw*out_ch products; no overlap when
      // kernel == stride, so this equals out_elements * in_ch.
      return grid * in_ch * out_ch * taps;
  }
  return 0;
}

LayerBuilder::LayerBuilder(ParameterStore& params, std::vector<LayerInfo>& layers,
                           std::uint64_t seed)
    : params_(params), layers_(layers), rng_(seed) {}

ParamId LayerBuilder::weight(const std::string& name, Shape shape, int fan_in) {
  // Kaiming uniform with a = sqrt(5): bound = 1 / sqrt(fan_in). The stronger
  // ReLU gain compounds through the residual stacks and blows up the output.
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::uniform_real_distribution<double> u(-bound, bound);
  Tensor t(shape);
  for (double& v : t.data()) v = static_cast<double>(static_cast<float>(u(rng_)));
  return params_.add(path(name), std::move(t));
}

ParamId LayerBuilder::zeros(const std::string& name, Shape shape) {
  return params_.add(path(name), Tensor(shape));
}

std::string LayerBuilder::path(std::string_view leaf) const {
  if (leaf.empty()) return prefix_;
  return prefix_.empty() ? std::string(leaf) : prefix_ + "." + std::string(leaf);
}

LayerBuilder::Scope::Scope(LayerBuilder& b, std::string_view component)
    : b_(b), prev_len_(b.prefix_.size()) {
  if (!b_.prefix_.empty()) b_.prefix_ += '.';
  b_.prefix_ += component;
}

LayerBuilder::Scope::~Scope() { b_.prefix_.resize(prev_len_); }

ConvLayer ConvLayer::create(LayerBuilder& b, std::string_view name, int in_ch, int out_ch,
                            int kernel, Activation act, LayerInfo::Grid grid) {
  auto scope = b.scope(name);
  ConvLayer l;
  l.in_ch = in_ch;
  l.out_ch = out_ch;
  l.kernel = kernel;
  l.padding = kernel / 2;
  l.activation = act;
  l.weight = b.weight("weight", Shape{out_ch, in_ch, kernel, kernel}, in_ch * kernel * kernel);
  l.bias = b.zeros("bias", Shape{1, out_ch, 1, 1});
  b.describe({b.path(""), LayerInfo::Kind::conv, grid, in_ch, out_ch, kernel, kernel});
  return l;
}

DSConv DSConv::create(LayerBuilder& b, std::string_view name, int channels) {
  auto scope = b.scope(name);
  DSConv l;
  l.channels = channels;
  {
    auto dw = b.scope("depthwise");
    l.depthwise_weight = b.weight("weight", Shape{channels, 1, 3, 3}, 9);
    l.depthwise_bias = b.zeros("bias", Shape{1, channels, 1, 1});
    b.describe({b.path(""), LayerInfo::Kind::depthwise, LayerInfo::Grid::full, channels,
                channels, 3, 3});
  }
  l.pointwise = ConvLayer::create(b, "pointwise", channels, channels, 1);
  return l;
}

CCA CCA::create(LayerBuilder& b, std::string_view name, int channels, int reduction) {
  require_shape(reduction >= 1 && channels % reduction == 0, "CCA",
                std::to_string(channels) + " channels not divisible by reduction " +
                    std::to_string(reduction));
  auto scope = b.scope(name);
  CCA l;
  l.channels = channels;
  l.reduction = reduction;
  const int mid = channels / reduction;
  l.reduce = ConvLayer::create(b, "reduce", channels, mid, 1, Activation::leaky_relu,
                               LayerInfo::Grid::pooled);
  l.expand = ConvLayer::create(b, "expand", mid, channels, 1, Activation::sigmoid,
                               LayerInfo::Grid::pooled);
  return l;
}

ReconstructionHead ReconstructionHead::create(LayerBuilder& b, std::string_view name,
                                              int channels, int scale) {
  auto scope = b.scope(name);
  ReconstructionHead h;
  h.scale = scale;
  h.conv = ConvLayer::create(b, "conv", channels, 3 * scale * scale, 3);
  return h;
}

Tensor cca_forward(const Tensor& x, const CCA& layer, const ParameterStore& params) {
  return layer.forward(EagerContext(params), x);
}

Tensor dsconv_forward(const Tensor& x, const DSConv& layer, const ParameterStore& params) {
  return layer.forward(EagerContext(params), x);
}

Tensor reconstruct(const Tensor& x, const ReconstructionHead& head, const ParameterStore& params) {
  return head.forward(EagerContext(params), x);
}

TapeContext TapeContext::with_leaves(Tape& tape, const ParameterStore& params) {
  std::vector<Var> vars;
  vars.reserve(params.size());
  for (ParamId i = 0; i < params.size(); ++i) vars.push_back(tape.leaf(params[i], i));
  return TapeContext(tape, std::move(vars));
}

}  // namespace hffn
