#pragma once

// High-frequency focused block (HFFB) and local feature fusion block (LFFB).

#include <optional>
#include <string>
#include <vector>

#include "hffn/layers.hpp"

namespace hffn {

/// Structural switches for the ablation variants. A disabled branch is
/// replaced by one 3x3 conv at the branch width.
struct Ablation {
  bool hfe = true;
  bool lfde = true;
  bool lffb = true;
  /// LFDE internals: DSConv (else a dense 3x3 conv) and the CCA gate.
  bool dsconv = true;
  bool lfde_cca = true;

  bool operator==(const Ablation&) const = default;
};

/// Tags passed to the observer from inside an HFE branch.
namespace probe {
inline constexpr std::string_view kHighInput = "F_HF";
inline constexpr std::string_view kLowFreq = "F_lf";
inline constexpr std::string_view kHighFreq = "F_hf";
}  // namespace probe

/// High-frequency enhancement branch.
///   F_lf = pool(up(F_HF)), F_hf = F_HF - F_lf,
///   F_ehf = sigmoid(conv_a(F_hf) + F_HF) * conv_b(F_HF), out = conv_out(F_ehf)
struct HFEBranch {
  ParamId up_weight = 0;
  ParamId up_bias = 0;
  ConvLayer conv_a;
  ConvLayer conv_b;
  ConvLayer conv_out;
  int channels = 0;

  static HFEBranch create(LayerBuilder& b, int channels);

  template <class Ctx>
  typename Ctx::Value forward(const Ctx& ctx, const typename Ctx::Value& f_high, int block) const {
    const Tensor& v = ctx.value(f_high);
    require_shape(v.channels() == channels, "hfe_branch",
                  "expected " + std::to_string(channels) + " channels");
    require_shape(v.height() % 2 == 0 && v.width() % 2 == 0, "hfe_branch",
                  "spatial dims must be even, got " + v.shape().str());
    auto low = ctx.avg_pool2d(ctx.conv_transpose2d(f_high, up_weight, up_bias, 2), 2, 2);
    auto high = ctx.sub(f_high, low);
    ctx.observe(block, probe::kHighInput, f_high);
    ctx.observe(block, probe::kLowFreq, low);
    ctx.observe(block, probe::kHighFreq, high);
    auto gate = ctx.sigmoid(ctx.add(conv_a.forward(ctx, high), f_high));
    auto enhanced = ctx.mul(gate, conv_b.forward(ctx, f_high));
    return conv_out.forward(ctx, enhanced);
  }
};

/// Low-frequency de-redundant branch: the first half of the channels goes
/// through DSConv, a 3x3 conv and CCA; the second half passes through.
struct LFDEBranch {
  std::optional<DSConv> dsconv;
  std::optional<ConvLayer> dense;  // replaces dsconv when disabled
  ConvLayer conv;
  std::optional<CCA> cca;
  int channels = 0;

  static LFDEBranch create(LayerBuilder& b, int channels, int reduction, const Ablation& ab);

  template <class Ctx>
  typename Ctx::Value forward(const Ctx& ctx, const typename Ctx::Value& f_low) const {
    const Tensor& v = ctx.value(f_low);
    require_shape(v.channels() == channels && channels % 2 == 0, "lfde_branch",
                  "expected an even channel count of " + std::to_string(channels) + ", got " +
                      std::to_string(v.channels()));
    const int half = channels / 2;
    auto processed = ctx.channel_slice(f_low, 0, half);
    auto identity = ctx.channel_slice(f_low, half, channels);
    processed = dsconv ? dsconv->forward(ctx, processed) : dense->forward(ctx, processed);
    processed = conv.forward(ctx, processed);
    if (cca) processed = cca->forward(ctx, processed);
    return ctx.channel_concat({processed, identity});
  }
};

struct HFFB {
  ConvLayer entry;
  std::optional<HFEBranch> hfe;
  std::optional<ConvLayer> hfe_substitute;
  std::optional<LFDEBranch> lfde;
  std::optional<ConvLayer> lfde_substitute;
  ConvLayer fuse;
  int channels = 0;
  /// Position in the model's flattened HFFB order; tags observer callbacks.
  int index = 0;

  static HFFB create(LayerBuilder& b, int channels, int reduction, const Ablation& ab, int index);

  template <class Ctx>
  typename Ctx::Value forward(const Ctx& ctx, const typename Ctx::Value& x) const {
    require_shape(ctx.value(x).channels() == channels, "hffb_forward",
                  "expected " + std::to_string(channels) + " channels, got " +
                      std::to_string(ctx.value(x).channels()));
    const int half = channels / 2;
    auto features = entry.forward(ctx, x);
    auto f_high = ctx.channel_slice(features, 0, half);
    auto f_low = ctx.channel_slice(features, half, channels);
    auto high_out = hfe ? hfe->forward(ctx, f_high, index) : hfe_substitute->forward(ctx, f_high);
    auto low_out = lfde ? lfde->forward(ctx, f_low) : lfde_substitute->forward(ctx, f_low);
    return ctx.add(fuse.forward(ctx, ctx.channel_concat({high_out, low_out})), x);
  }
};

struct LFFB {
  std::vector<HFFB> blocks;
  ConvLayer fuse;
  CCA cca;
  int channels = 0;

  static LFFB create(LayerBuilder& b, int channels, int m, int reduction, const Ablation& ab,
                     int first_index);

  template <class Ctx>
  typename Ctx::Value forward(const Ctx& ctx, const typename Ctx::Value& x) const {
    std::vector<typename Ctx::Value> outputs;
    outputs.reserve(blocks.size());
    auto current = x;
    for (const HFFB& block : blocks) {
      current = block.forward(ctx, current);
      outputs.push_back(current);
    }
    return ctx.add(cca.forward(ctx, fuse.forward(ctx, ctx.channel_concat(outputs))), x);
  }
};

// Eager conveniences; `block` tags observer callbacks only.
Tensor hfe_branch(const Tensor& f_high, const HFEBranch& hfe, const ParameterStore& params);
Tensor lfde_branch(const Tensor& f_low, const LFDEBranch& lfde, const ParameterStore& params);
Tensor hffb_forward(const Tensor& x, const HFFB& block, const ParameterStore& params);
Tensor lffb_forward(const Tensor& x, const LFFB& block, const ParameterStore& params);

}  // namespace hffn
