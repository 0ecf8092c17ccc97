#include "hffn/blocks.hpp"

namespace hffn {

HFEBranch HFEBranch::create(LayerBuilder& b, int channels) {
  auto scope = b.scope("hfe");
  HFEBranch h;
  h.channels = channels;
  {
    auto up = b.scope("up");
    h.up_weight = b.weight("weight", Shape{channels, channels, 2, 2}, channels);
    h.up_bias = b.zeros("bias", Shape{1, channels, 1, 1});
    b.describe({b.path(""), LayerInfo::Kind::conv_transpose, LayerInfo::Grid::full, channels,
                channels, 2, 2});
  }
  h.conv_a = ConvLayer::create(b, "conv_a", channels, channels, 3);
  h.conv_b = ConvLayer::create(b, "conv_b", channels, channels, 3);
  h.conv_out = ConvLayer::create(b, "conv_out", channels, channels, 3);
  return h;
}

LFDEBranch LFDEBranch::create(LayerBuilder& b, int channels, int reduction, const Ablation& ab) {
  auto scope = b.scope("lfde");
  LFDEBranch l;
  l.channels = channels;
  const int half = channels / 2;
  if (ab.dsconv) {
    l.dsconv = DSConv::create(b, "dsconv", half);
  } else {
    l.dense = ConvLayer::create(b, "dense", half, half, 3);
  }
  l.conv = ConvLayer::create(b, "conv", half, half, 3, Activation::leaky_relu);
  if (ab.lfde_cca) l.cca = CCA::create(b, "cca", half, reduction);
  return l;
}

HFFB HFFB::create(LayerBuilder& b, int channels, int reduction, const Ablation& ab, int index) {
  require_shape(channels % 4 == 0, "HFFB",
                "channel count " + std::to_string(channels) + " must be divisible by 4");
  auto scope = b.scope("hffb" + std::to_string(index));
  HFFB h;
  h.channels = channels;
  h.index = index;
  const int half = channels / 2;
  h.entry = ConvLayer::create(b, "entry", channels, channels, 1, Activation::leaky_relu);
  if (ab.hfe) {
    h.hfe = HFEBranch::create(b, half);
  } else {
    h.hfe_substitute = ConvLayer::create(b, "hfe_conv", half, half, 3);
  }
  if (ab.lfde) {
    h.lfde = LFDEBranch::create(b, half, reduction, ab);
  } else {
    h.lfde_substitute = ConvLayer::create(b, "lfde_conv", half, half, 3);
  }
  h.fuse = ConvLayer::create(b, "fuse", channels, channels, 1);
  return h;
}

LFFB LFFB::create(LayerBuilder& b, int channels, int m, int reduction, const Ablation& ab,
                  int first_index) {
  require_shape(m >= 1, "LFFB", "needs at least one HFFB");
  LFFB l;
  l.channels = channels;
  for (int k = 0; k < m; ++k) {
    l.blocks.push_back(HFFB::create(b, channels, reduction, ab, first_index + k));
  }
  l.fuse = ConvLayer::create(b, "fuse", m * channels, channels, 1);
  l.cca = CCA::create(b, "cca", channels, reduction);
  return l;
}

Tensor hfe_branch(const Tensor& f_high, const HFEBranch& hfe, const ParameterStore& params) {
  return hfe.forward(EagerContext(params), f_high, -1);
}

Tensor lfde_branch(const Tensor& f_low, const LFDEBranch& lfde, const ParameterStore& params) {
  return lfde.forward(EagerContext(params), f_low);
}

Tensor hffb_forward(const Tensor& x, const HFFB& block, const ParameterStore& params) {
  return block.forward(EagerContext(params), x);
}

Tensor lffb_forward(const Tensor& x, const LFFB& block, const ParameterStore& params) {
  return block.forward(EagerContext(params), x);
}

}  // namespace hffn
