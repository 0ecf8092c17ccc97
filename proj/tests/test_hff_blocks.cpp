#include "doctest.h"

#include <cmath>
#include <optional>
#include <random>

#include "hffn/blocks.hpp"
#include "oracles.hpp"

using namespace hffn;
using oracle::random_tensor;

namespace {

struct Fixture {
  ParameterStore params;
  std::vector<LayerInfo> layers;
  LayerBuilder builder{params, layers, 5};
};

struct Probe {
  std::optional<Tensor> input, low, high;
  Observer observer() {
    return [this](int, std::string_view tag, const Tensor& v) {
      if (tag == probe::kHighInput) input = v;
      if (tag == probe::kLowFreq) low = v;
      if (tag == probe::kHighFreq) high = v;
    };
  }
};

void zero(ParameterStore& p, ParamId id) { p[id] = Tensor(p[id].shape()); }

Ablation ablation_from(std::string_view spec) {
  Ablation ab;
  if (spec == "no-hfe") ab.hfe = false;
  if (spec == "no-lfde") ab.lfde = false;
  return ab;
}

}  // namespace

TEST_CASE("HFFB parameter budget at C=48") {
  Fixture f;
  HFFB::create(f.builder, 48, 4, Ablation{}, 0);
  CHECK(f.params.scalar_count() == 24327);
  Fixture g;
  LFFB::create(g.builder, 48, 5, 4, Ablation{}, 0);
  CHECK(g.params.scalar_count() == 134415);
}

TEST_CASE("HFE decomposition is the definitional difference") {
  Fixture f;
  HFEBranch hfe = HFEBranch::create(f.builder, 6);
  std::mt19937_64 rng(1);
  const Tensor x = random_tensor({2, 6, 6, 8}, rng);
  Probe probe;
  const Tensor y = hfe.forward(EagerContext(f.params, probe.observer()), x, 0);
  CHECK(y.shape() == x.shape());
  REQUIRE(probe.high.has_value());
  CHECK(*probe.input == x);
  // F_hf is defined as F_HF - F_lf, element by element.
  CHECK(ops::sub(*probe.input, *probe.low) == *probe.high);
  // Adding back only carries the two roundings: half an ulp of F_hf from the
  // subtraction and half an ulp of F_HF from the addition.
  const Tensor back = ops::add(*probe.high, *probe.low);
  auto ulp = [](double v) { return v == 0.0 ? 0.0 : std::ldexp(1.0, std::ilogb(v) - 52); };
  for (std::size_t i = 0; i < back.size(); ++i) {
    CHECK(std::abs(back[i] - x[i]) <= std::max(ulp((*probe.high)[i]), ulp(x[i])));
  }
  // Low path is up-projection followed by 2x2 averaging.
  const Tensor low = oracle::avg_pool2d(
      oracle::conv_transpose2d(x, f.params[hfe.up_weight], f.params[hfe.up_bias], 2), 2, 2);
  CHECK(max_abs_diff(low, *probe.low) <= 1e-12);
}

TEST_CASE("HFE with an identity up-projection sees no high frequencies") {
  Fixture f;
  HFEBranch hfe = HFEBranch::create(f.builder, 4);
  Tensor& w = f.params[hfe.up_weight];
  w = Tensor(w.shape());
  for (int c = 0; c < 4; ++c)
    for (int p = 0; p < 2; ++p)
      for (int q = 0; q < 2; ++q) w.at(c, c, p, q) = 1.0;
  std::mt19937_64 rng(2);
  Probe probe;
  hfe.forward(EagerContext(f.params, probe.observer()), random_tensor({1, 4, 4, 4}, rng), 0);
  CHECK(*probe.low == *probe.input);
  CHECK(oracle::max_abs(*probe.high) == 0.0);
}

TEST_CASE("HFE branch rejects odd sizes and matches the gate formula") {
  Fixture f;
  HFEBranch hfe = HFEBranch::create(f.builder, 4);
  EagerContext ctx(f.params);
  CHECK_THROWS_AS(hfe.forward(ctx, Tensor(Shape{1, 4, 5, 4}), 0), ShapeError);

  std::mt19937_64 rng(3);
  const Tensor x = random_tensor({1, 4, 4, 6}, rng);
  const auto& p = f.params;
  const Tensor low = oracle::avg_pool2d(oracle::conv_transpose2d(x, p[hfe.up_weight], p[hfe.up_bias], 2), 2, 2);
  const Tensor high = ops::sub(x, low);
  const Tensor gate = ops::sigmoid(ops::add(oracle::conv2d(high, p[hfe.conv_a.weight], p[hfe.conv_a.bias], 1, 1), x));
  const Tensor enhanced = ops::mul(gate, oracle::conv2d(x, p[hfe.conv_b.weight], p[hfe.conv_b.bias], 1, 1));
  const Tensor ref = oracle::conv2d(enhanced, p[hfe.conv_out.weight], p[hfe.conv_out.bias], 1, 1);
  CHECK(max_abs_diff(hfe_branch(x, hfe, p), ref) <= 1e-12);
}

TEST_CASE("HFE gradient") {
  Fixture f;
  HFEBranch hfe = HFEBranch::create(f.builder, 4);
  std::mt19937_64 rng(4);
  CHECK(oracle::layer_gradient_error(f.params, random_tensor({1, 4, 4, 4}, rng),
                                     [&](const TapeContext& c, Var v) { return hfe.forward(c, v, 0); },
                                     17) <= 1e-4);
}

TEST_CASE("LFDE passes the second half through untouched") {
  Fixture f;
  LFDEBranch lfde = LFDEBranch::create(f.builder, 8, 2, Ablation{});
  std::mt19937_64 rng(5);
  const Tensor x = random_tensor({1, 8, 5, 5}, rng);
  const Tensor y = lfde_branch(x, lfde, f.params);
  CHECK(ops::channel_slice(y, 4, 8) == ops::channel_slice(x, 4, 8));

  // The processed half depends only on the first half of the input.
  Tensor x2 = x;
  for (int c = 4; c < 8; ++c)
    for (int i = 0; i < 25; ++i) x2.plane(0, c)[i] += 1.0;
  const Tensor y2 = lfde_branch(x2, lfde, f.params);
  CHECK(ops::channel_slice(y2, 0, 4) == ops::channel_slice(y, 0, 4));

  // DSConv -> 3x3 conv + leaky -> CCA on the processed half.
  const auto& p = f.params;
  const Tensor a = ops::channel_slice(x, 0, 4);
  Tensor t = oracle::depthwise_conv2d(a, p[lfde.dsconv->depthwise_weight], p[lfde.dsconv->depthwise_bias], 1);
  t = oracle::conv2d(t, p[lfde.dsconv->pointwise.weight], p[lfde.dsconv->pointwise.bias], 1, 0);
  t = ops::leaky_relu(oracle::conv2d(t, p[lfde.conv.weight], p[lfde.conv.bias], 1, 1), kLeakySlope);
  const Tensor ref = cca_forward(t, *lfde.cca, p);
  CHECK(max_abs_diff(ops::channel_slice(y, 0, 4), ref) <= 1e-12);
}

TEST_CASE("LFDE internal ablations") {
  Ablation ab;
  ab.dsconv = false;
  ab.lfde_cca = false;
  Fixture f;
  LFDEBranch lfde = LFDEBranch::create(f.builder, 8, 4, ab);
  CHECK_FALSE(lfde.dsconv.has_value());
  CHECK(lfde.dense.has_value());
  CHECK_FALSE(lfde.cca.has_value());
  std::mt19937_64 rng(6);
  const Tensor x = random_tensor({1, 8, 4, 4}, rng);
  CHECK(lfde_branch(x, lfde, f.params).shape() == x.shape());
  CHECK(oracle::layer_gradient_error(f.params, x,
                                     [&](const TapeContext& c, Var v) { return lfde.forward(c, v); },
                                     19) <= 1e-4);
}

TEST_CASE("zero fuse makes an HFFB the identity") {
  for (const char* spec : {"full", "no-hfe", "no-lfde"}) {
    Fixture f;
    HFFB block = HFFB::create(f.builder, 8, 2, ablation_from(spec), 0);
    oracle::randomize_biases(f.params, 8);
    zero(f.params, block.fuse.weight);
    zero(f.params, block.fuse.bias);
    std::mt19937_64 rng(7);
    const Tensor x = random_tensor({2, 8, 6, 4}, rng);
    CHECK(hffb_forward(x, block, f.params) == x);
  }
}

TEST_CASE("zero fuse makes an LFFB the identity") {
  Fixture f;
  LFFB block = LFFB::create(f.builder, 8, 3, 2, Ablation{}, 0);
  oracle::randomize_biases(f.params, 9);
  zero(f.params, block.fuse.weight);
  zero(f.params, block.fuse.bias);
  std::mt19937_64 rng(8);
  const Tensor x = random_tensor({1, 8, 4, 6}, rng);
  CHECK(lffb_forward(x, block, f.params) == x);
}

TEST_CASE("HFFB composition and ablation substitutes") {
  Fixture f;
  HFFB block = HFFB::create(f.builder, 8, 2, Ablation{}, 3);
  CHECK(block.index == 3);
  CHECK(f.params.name(0) == "hffb3.entry.weight");
  std::mt19937_64 rng(9);
  const Tensor x = random_tensor({1, 8, 4, 4}, rng);
  const auto& p = f.params;
  const Tensor feat = ops::leaky_relu(oracle::conv2d(x, p[block.entry.weight], p[block.entry.bias], 1, 0), kLeakySlope);
  const Tensor hi = hfe_branch(ops::channel_slice(feat, 0, 4), *block.hfe, p);
  const Tensor lo = lfde_branch(ops::channel_slice(feat, 4, 8), *block.lfde, p);
  const Tensor ref = ops::add(oracle::conv2d(ops::channel_concat({&hi, &lo}), p[block.fuse.weight], p[block.fuse.bias], 1, 0), x);
  CHECK(max_abs_diff(hffb_forward(x, block, p), ref) <= 1e-12);

  Ablation ab;
  ab.hfe = false;
  ab.lfde = false;
  Fixture g;
  HFFB plain = HFFB::create(g.builder, 8, 2, ab, 0);
  CHECK(plain.hfe_substitute.has_value());
  CHECK(plain.lfde_substitute.has_value());
  CHECK(plain.hfe_substitute->kernel == 3);
  CHECK(plain.hfe_substitute->activation == Activation::none);
  // Odd sizes are fine without the HFE branch.
  CHECK(hffb_forward(random_tensor({1, 8, 5, 3}, rng), plain, g.params).shape() == Shape{1, 8, 5, 3});
  CHECK_THROWS_AS(HFFB::create(g.builder, 6, 2, Ablation{}, 0), ShapeError);
}

TEST_CASE("HFFB with L1 loss: every weight gradient matches finite differences") {
  Fixture f;
  HFFB block = HFFB::create(f.builder, 8, 2, Ablation{}, 0);
  std::mt19937_64 rng(10);
  const Tensor x = random_tensor({1, 8, 4, 4}, rng);
  Tensor target = hffb_forward(x, block, f.params);
  // Keep every residual well away from the L1 kink.
  std::uniform_real_distribution<double> u(0.05, 0.3);
  for (double& v : target.data()) v += (u(rng) > 0.175 ? 1 : -1) * u(rng);
  CHECK(oracle::layer_gradient_error(f.params, x,
                                     [&](const TapeContext& c, Var v) {
                                       return ad::l1_loss(block.forward(c, v), c.tape().constant(target));
                                     },
                                     23) <= 1e-4);
}

TEST_CASE("LFFB gradient within relative 1e-4 or absolute 1e-9") {
  // Deep residual sums put a floor of roughly ulp(f) / step under any central
  // difference, so gradients near 1e-7 cannot be resolved to a relative 1e-4.
  Fixture f;
  LFFB block = LFFB::create(f.builder, 8, 2, 2, Ablation{}, 0);
  std::mt19937_64 rng(11);
  const FiniteDiffReport r = oracle::layer_gradient_report(
      f.params, random_tensor({1, 8, 4, 4}, rng),
      [&](const TapeContext& c, Var v) { return block.forward(c, v); }, 29);
  CHECK(r.entries.size() == 1 * 8 * 4 * 4 + f.params.scalar_count());
  CHECK(oracle::count_outside(r, 1e-4, 1e-9) == 0);
  CHECK(r.max_absolute() <= 1e-9);
}
