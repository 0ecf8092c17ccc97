#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hffn/blocks.hpp"
#include "hffn/layers.hpp"

namespace hffn {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct ModelConfig {
  int scale = 4;
  int channels = 48;
  int n_lffb = 6;
  int m_hffb = 5;
  int cca_reduction = 4;
  Ablation ablation;

  /// Throws ConfigError listing every violated constraint.
  void validate() const;
  /// Stable one-line text form, e.g. "scale=4 channels=48 ...".
  std::string canonical() const;
  /// FNV-1a 64 of canonical().
  std::uint64_t fingerprint() const;

  bool operator==(const ModelConfig&) const = default;
};

/// Parse an ablation spec such as "no-hfe,no-cca". Empty or "none" means the
/// full model. Throws ConfigError on unknown tokens.
Ablation parse_ablation(const std::string& spec);
std::string ablation_name(const Ablation& ab);

struct ParamGroup {
  std::string path;
  std::size_t count = 0;
};

struct ParamBreakdown {
  std::size_t total = 0;
  /// Aggregated by top-level component (sfe, lffb<i>, global_fuse, ...).
  std::vector<ParamGroup> modules;
  /// Aggregated by the component inside the first HFFB (entry, hfe, lfde, fuse).
  std::vector<ParamGroup> hffb_parts;
  /// Every parameter tensor.
  std::vector<ParamGroup> tensors;
};

class Model {
 public:
  /// Constructs every layer in a fixed order and draws weights from `seed`.
  static Model build(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  const ParameterStore& params() const { return params_; }
  ParameterStore& params() { return params_; }
  const std::vector<LayerInfo>& layers() const { return layers_; }
  /// Flattened HFFB list in execution order.
  std::vector<const HFFB*> hffbs() const;
  std::size_t hffb_count() const;

  /// LR (B,3,H,W) in [0,1] to SR (B,3,H*s,W*s). Odd sizes are reflect-padded to
  /// even internally and the output is cropped back.
  Tensor forward(const Tensor& lr, Observer observer = {}) const;
  /// Average of forward passes over the 8 dihedral transforms of the input.
  Tensor self_ensemble_forward(const Tensor& lr) const;

  template <class Ctx>
  typename Ctx::Value forward(const Ctx& ctx, const typename Ctx::Value& lr) const;

  ParamBreakdown param_count() const;
  /// Multiply-accumulates for one image whose SR output is out_h x out_w.
  std::uint64_t multi_adds(int out_h, int out_w) const;

 private:
  ModelConfig config_;
  ParameterStore params_;
  std::vector<LayerInfo> layers_;

  ConvLayer sfe_;
  std::vector<LFFB> lffbs_;
  std::vector<HFFB> chain_;  // used when the LFFB wrapper is ablated
  ConvLayer global_fuse_;
  ConvLayer global_refine_;
  ReconstructionHead head_;
};

/// Weight-file layout (little endian):
///   "HFFN" | version u32 | config fingerprint u64 | param count u64 | f32 * count
inline constexpr std::uint32_t kWeightFileVersion = 1;
inline constexpr std::size_t kWeightHeaderBytes = 4 + 4 + 8 + 8;

class WeightFileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void save_weights(const Model& model, const std::filesystem::path& path);
/// Builds the model for `config` and fills it from `path`. Rejects files whose
/// fingerprint or parameter count differs, and truncated files.
Model load_weights(const ModelConfig& config, const std::filesystem::path& path);

template <class Ctx>
typename Ctx::Value Model::forward(const Ctx& ctx, const typename Ctx::Value& lr) const {
  const Tensor& in = ctx.value(lr);
  require_shape(in.channels() == 3, "forward", "expected 3 input channels, got " +
                                                   std::to_string(in.channels()));
  require_shape(in.height() >= 8 && in.width() >= 8, "forward",
                "input must be at least 8x8, got " + in.shape().str());
  in.require_finite("forward input");
  const int out_h = in.height() * config_.scale;
  const int out_w = in.width() * config_.scale;
  const int pad_h = in.height() % 2;
  const int pad_w = in.width() % 2;

  auto x = (pad_h || pad_w) ? ctx.reflect_pad_br(lr, pad_h, pad_w) : lr;
  auto f0 = sfe_.forward(ctx, x);
  std::vector<typename Ctx::Value> taps;
  auto current = f0;
  if (config_.ablation.lffb) {
    for (const LFFB& block : lffbs_) {
      current = block.forward(ctx, current);
      taps.push_back(current);
    }
  } else {
    for (std::size_t k = 0; k < chain_.size(); ++k) {
      current = chain_[k].forward(ctx, current);
      if ((k + 1) % static_cast<std::size_t>(config_.m_hffb) == 0) taps.push_back(current);
    }
  }
  auto fused = global_refine_.forward(ctx, global_fuse_.forward(ctx, ctx.channel_concat(taps)));
  auto sr = head_.forward(ctx, ctx.add(f0, fused));
  return (pad_h || pad_w) ? ctx.crop(sr, out_h, out_w) : sr;
}

}  // namespace hffn
