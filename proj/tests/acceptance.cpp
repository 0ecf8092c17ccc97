// Acceptance checks. Run as `hffn_acceptance N` for criterion N (1-9) or
// `hffn_acceptance all`. Each criterion prints one PASS/FAIL line followed by
// indented detail lines, and the exit status is 0 only on PASS.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <sstream>

#include "hffn/blocks.hpp"
#include "hffn/image.hpp"
#include "hffn/metrics.hpp"
#include "hffn/network.hpp"
#include "hffn/training.hpp"
#include "oracles.hpp"

using namespace hffn;
namespace fs = std::filesystem;

namespace {

struct Report {
  bool pass = true;
  std::vector<std::string> lines;

  void note(const std::string& s) { lines.push_back(s); }
  // Records a sub-check; the criterion passes only if every sub-check does.
  void check(bool ok, const std::string& s) {
    pass = pass && ok;
    lines.push_back(std::string(ok ? "[ok]   " : "[FAIL] ") + s);
  }
};

std::string fmt(double v, int prec = 6) {
  std::ostringstream os;
  os << std::setprecision(prec) << v;
  return os.str();
}

std::string pct(double value, double target) {
  std::ostringstream os;
  os << std::showpos << std::fixed << std::setprecision(2) << 100.0 * (value / target - 1.0) << "%";
  return os.str();
}

bool within(double value, double target, double tol) { return std::abs(value / target - 1.0) <= tol; }

ModelConfig config_x(int scale) {
  ModelConfig c;
  c.scale = scale;
  return c;
}

// ------------------------------------------------------------------ 1

Report structural_budget() {
  Report r;
  const std::map<int, double> reference{{2, 851e3}, {3, 857e3}, {4, 867e3}};
  for (const auto& [s, target] : reference) {
    const Model m = Model::build(config_x(s), 0);
    const ParamBreakdown b = m.param_count();
    r.check(within(static_cast<double>(b.total), target, 0.10),
            "x" + std::to_string(s) + ": " + std::to_string(b.total) + " parameters vs " + fmt(target / 1e3) +
                "K (" + pct(static_cast<double>(b.total), target) + ", tolerance 10%)");
    if (s == 4) {
      std::ostringstream os;
      for (const ParamGroup& g : b.modules) os << g.path << "=" << g.count << " ";
      r.note("x4 modules: " + os.str());
      std::ostringstream hp;
      for (const ParamGroup& g : b.hffb_parts) hp << g.path << "=" << g.count << " ";
      r.note("x4 per HFFB: " + hp.str());
    }
  }
  return r;
}

// ------------------------------------------------------------------ 2

Report ablation_sweep() {
  Report r;
  const std::map<int, double> reference{{4, 705e3}, {5, 867e3}, {6, 1026e3}};
  std::size_t prev = 0;
  bool increasing = true;
  for (const auto& [m, target] : reference) {
    ModelConfig c;
    c.m_hffb = m;
    const std::size_t total = Model::build(c, 0).param_count().total;
    r.check(within(static_cast<double>(total), target, 0.10),
            "m=" + std::to_string(m) + ": " + std::to_string(total) + " vs " + fmt(target / 1e3) + "K (" +
                pct(static_cast<double>(total), target) + ")");
    increasing = increasing && total > prev;
    prev = total;
  }
  r.check(increasing, "totals strictly increase with m");
  return r;
}

// ------------------------------------------------------------------ 3

Report compute_budget() {
  Report r;
  const Model m = Model::build(config_x(4), 0);
  const double target = 32.6e9;
  const std::uint64_t macs = m.multi_adds(720, 1280);
  r.check(within(static_cast<double>(macs), target, 0.10),
          "x4 at 1280x720: " + fmt(macs / 1e9, 5) + "G multiply-accumulates vs 32.6G (" +
              pct(static_cast<double>(macs), target) + ", tolerance 10%)");

  // Where the operations go, to locate the deviating assumption.
  std::map<std::string, std::uint64_t> by_part;
  for (const LayerInfo& l : m.layers()) {
    std::string key = l.path;
    const auto h = key.find("hffb");
    if (h != std::string::npos) {
      const auto dot = key.find('.', key.find('.', h) + 1);
      key = "hffb." + key.substr(key.find('.', h) + 1, dot - key.find('.', h) - 1);
    } else if (key.starts_with("lffb")) {
      key = "lffb." + key.substr(key.find('.') + 1);
    }
    by_part[key] += l.macs(180, 320);
  }
  for (const auto& [k, v] : by_part) {
    r.note(k + ": " + fmt(v / 1e9, 4) + "G (" + fmt(100.0 * v / macs, 3) + "%)");
  }
  const double hfe = static_cast<double>(by_part["hffb.hfe"]);
  r.note("LR grid 320x180 = 57600 pixels; one 1x1 conv 48->48 costs " + fmt(57600.0 * 48 * 48 / 1e9, 4) + "G");
  r.note("without the HFE branches the total would be " +
         fmt((macs - hfe) / 1e9, 4) + "G");
  return r;
}

// ------------------------------------------------------------------ 4

Report numerical_correctness() {
  Report r;
  using oracle::rand_int;
  using oracle::random_tensor;
  std::mt19937_64 rng(2024);
  constexpr int kShapes = 120;

  std::map<std::string, double> worst;
  for (int t = 0; t < kShapes; ++t) {
    {
      const int k = std::array{1, 2, 3, 5}[rand_int(rng, 0, 3)], stride = rand_int(rng, 1, 3);
      const int pad = rand_int(rng, 0, 2);
      const int h = rand_int(rng, std::max(1, k - 2 * pad), 12), w = rand_int(rng, std::max(1, k - 2 * pad), 12);
      const int ic = rand_int(rng, 1, 6), oc = rand_int(rng, 1, 6);
      const Tensor x = random_tensor({rand_int(rng, 1, 2), ic, h, w}, rng);
      const Tensor wt = random_tensor({oc, ic, k, k}, rng), b = random_tensor({1, oc, 1, 1}, rng);
      worst["conv2d"] = std::max(worst["conv2d"],
                                 max_abs_diff(ops::conv2d(x, wt, b, stride, pad), oracle::conv2d(x, wt, b, stride, pad)));
    }
    {
      const int k = rand_int(rng, 1, 4), stride = rand_int(rng, 1, 3);
      const int ic = rand_int(rng, 1, 5), oc = rand_int(rng, 1, 5);
      const Tensor x = random_tensor({rand_int(rng, 1, 2), ic, rand_int(rng, 1, 8), rand_int(rng, 1, 8)}, rng);
      const Tensor wt = random_tensor({ic, oc, k, k}, rng), b = random_tensor({1, oc, 1, 1}, rng);
      worst["conv_transpose2d"] =
          std::max(worst["conv_transpose2d"],
                   max_abs_diff(ops::conv_transpose2d(x, wt, b, stride), oracle::conv_transpose2d(x, wt, b, stride)));
    }
    {
      const int k = std::array{1, 3, 5}[rand_int(rng, 0, 2)], pad = rand_int(rng, 0, k / 2);
      const int ch = rand_int(rng, 1, 6);
      const Tensor x = random_tensor({rand_int(rng, 1, 2), ch, rand_int(rng, k, 10), rand_int(rng, k, 10)}, rng);
      const Tensor wt = random_tensor({ch, 1, k, k}, rng), b = random_tensor({1, ch, 1, 1}, rng);
      worst["depthwise_conv2d"] =
          std::max(worst["depthwise_conv2d"],
                   max_abs_diff(ops::depthwise_conv2d(x, wt, b, pad), oracle::depthwise_conv2d(x, wt, b, pad)));
    }
    {
      const int k = rand_int(rng, 1, 3), s = rand_int(rng, 1, 3);
      const Tensor x = random_tensor(
          {rand_int(rng, 1, 2), rand_int(rng, 1, 5), k + s * rand_int(rng, 0, 5), k + s * rand_int(rng, 0, 5)}, rng);
      worst["avg_pool2d"] = std::max(worst["avg_pool2d"], max_abs_diff(ops::avg_pool2d(x, k, s), oracle::avg_pool2d(x, k, s)));
    }
    {
      const int f = rand_int(rng, 1, 4);
      const Tensor x = random_tensor({rand_int(rng, 1, 2), f * f * rand_int(rng, 1, 3), rand_int(rng, 1, 6), rand_int(rng, 1, 6)}, rng);
      worst["pixel_shuffle"] = std::max(worst["pixel_shuffle"], max_abs_diff(ops::pixel_shuffle(x, f), oracle::pixel_shuffle(x, f)));
    }
    {
      const Tensor x = random_tensor({rand_int(rng, 1, 2), rand_int(rng, 1, 6), rand_int(rng, 1, 9), rand_int(rng, 1, 9)}, rng);
      worst["channel_contrast"] =
          std::max(worst["channel_contrast"], max_abs_diff(ops::channel_contrast(x), oracle::channel_contrast(x)));
    }
  }
  for (const auto& [op, err] : worst) {
    r.check(err <= 1e-10, op + ": max abs error " + fmt(err, 3) + " over " + std::to_string(kShapes) +
                              " random shapes (tolerance 1e-10)");
  }

  // Full-model gradient check on the miniature configuration.
  ModelConfig c;
  c.scale = 2;
  c.channels = 8;
  c.n_lffb = 1;
  c.m_hffb = 1;
  c.cca_reduction = 2;
  const Model model = Model::build(c, 1);
  std::mt19937_64 xr(1);
  const Tensor x = random_tensor({1, 3, 8, 8}, xr, 0, 1);
  auto forward = [&](const TapeContext& ctx, Var v) { return model.forward(ctx, v); };
  const auto t0 = std::chrono::steady_clock::now();
  const FiniteDiffReport fd = oracle::layer_gradient_report(model.params(), x, forward);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const double rel = fd.max_relative();
  r.check(rel <= 1e-4, "full model (C=8, n=1, m=1, 8x8 input, step 1e-5): max relative error " + fmt(rel, 4) +
                           " over " + std::to_string(fd.entries.size()) + " coordinates (tolerance 1e-4)");

  // Diagnostics: which coordinates miss, and how they behave at other steps.
  std::vector<std::size_t> over;
  double max_grad_over = 0.0;
  for (std::size_t i = 0; i < fd.entries.size(); ++i) {
    if (fd.relative_error(fd.entries[i]) > 1e-4) {
      over.push_back(i);
      max_grad_over = std::max(max_grad_over, std::abs(fd.entries[i].analytic));
    }
  }
  double grad_scale = 0.0;
  for (const auto& e : fd.entries) grad_scale = std::max(grad_scale, std::abs(e.analytic));
  r.note("coordinates above 1e-4: " + std::to_string(over.size()) + "; largest |gradient| among them " +
         fmt(max_grad_over, 3) + " (largest overall " + fmt(grad_scale, 3) + "); max |analytic - numeric| " +
         fmt(fd.max_absolute(), 3) + "; check took " + fmt(secs, 3) + " s");
  std::vector<FiniteDiffReport> alt;
  const std::vector<double> steps{1e-3, 1e-4, 1e-6, 1e-7};
  for (double h : steps) {
    std::vector<Tensor> points{x};
    for (const Tensor& p : model.params().values()) points.push_back(p);
    FiniteDiffOptions opt;
    opt.step = h;
    alt.push_back(finite_diff_report(
        [&](Tape& tape, std::span<const Var> v) {
          TapeContext ctx(tape, std::vector<Var>(v.begin() + 1, v.end()));
          return model.forward(ctx, v[0]);
        },
        points, opt));
    r.note("  same check at step " + fmt(h, 2) + ": max relative error " + fmt(alt.back().max_relative(), 4));
  }
  double best_worst = 0.0;
  for (std::size_t i : over) {
    double best = 1e300;
    for (const auto& a : alt) best = std::min(best, a.relative_error(a.entries[i]));
    best_worst = std::max(best_worst, best);
  }
  if (!over.empty()) {
    r.note("each failing coordinate agrees with at least one other step to within " + fmt(best_worst, 3) +
           " relative (diagnostic only; the verdict uses step 1e-5)");
  }
  return r;
}

// ------------------------------------------------------------------ 5

Report block_identities() {
  Report r;
  // Decomposition on real activations of the default x4 network.
  const Model model = Model::build(config_x(4), 0);
  const Image img = synthetic_image(32, 32, 5);
  std::size_t total = 0, mismatched = 0, definitional = 0, beyond_rounding = 0;
  double worst_ulps = 0.0;
  std::map<int, std::map<std::string, Tensor>> seen;
  model.forward(img.pixels, [&](int block, std::string_view tag, const Tensor& v) {
    seen[block][std::string(tag)] = v;
  });
  for (auto& [block, maps] : seen) {
    const Tensor& in = maps.at(std::string(probe::kHighInput));
    const Tensor& lo = maps.at(std::string(probe::kLowFreq));
    const Tensor& hi = maps.at(std::string(probe::kHighFreq));
    for (std::size_t i = 0; i < in.size(); ++i) {
      ++total;
      const double sum = hi[i] + lo[i];
      if (sum != in[i]) {
        ++mismatched;
        const double ulp = std::ldexp(1.0, std::ilogb(in[i] == 0.0 ? 1e-300 : in[i]) - 52);
        worst_ulps = std::max(worst_ulps, std::abs(sum - in[i]) / ulp);
        // The sum is rounded on the grid of its larger operand.
        const double big = std::max(std::abs(hi[i]), std::abs(lo[i]));
        if (std::abs(sum - in[i]) > std::ldexp(1.0, std::ilogb(big) - 52)) ++beyond_rounding;
      }
      if (in[i] - lo[i] != hi[i]) ++definitional;
    }
  }
  r.check(mismatched == 0, "F_hf + F_lf == F_HF bit-exact on " + std::to_string(seen.size()) +
                               " HFFBs of the x4 network: " + std::to_string(mismatched) + " of " +
                               std::to_string(total) + " elements differ (worst " + fmt(worst_ulps, 3) +
                               " ulp of F_HF)");
  r.note("differences larger than one ulp of max(|F_hf|, |F_lf|): " + std::to_string(beyond_rounding));
  r.note("F_hf == F_HF - F_lf bit-exact: " + std::to_string(total - definitional) + " of " +
         std::to_string(total) + " elements");

  // Zero-fuse residual identities at the default width, with non-zero biases.
  auto zero = [](ParameterStore& p, ParamId id) { p[id] = Tensor(p[id].shape()); };
  std::mt19937_64 rng(4);
  const Tensor x = oracle::random_tensor({1, 48, 12, 10}, rng);
  {
    ParameterStore params;
    std::vector<LayerInfo> layers;
    LayerBuilder builder(params, layers, 3);
    const HFFB b = HFFB::create(builder, 48, 4, Ablation{}, 0);
    oracle::randomize_biases(params, 5);
    zero(params, b.fuse.weight);
    zero(params, b.fuse.bias);
    r.check(hffb_forward(x, b, params) == x, "HFFB with a zero fuse conv returns its input bit-exactly (C=48)");
  }
  {
    ParameterStore params;
    std::vector<LayerInfo> layers;
    LayerBuilder builder(params, layers, 3);
    const LFFB b = LFFB::create(builder, 48, 5, 4, Ablation{}, 0);
    oracle::randomize_biases(params, 5);
    zero(params, b.fuse.weight);
    zero(params, b.fuse.bias);
    r.check(lffb_forward(x, b, params) == x, "LFFB with a zero fuse conv returns its input bit-exactly (C=48, m=5)");
  }
  return r;
}

// ------------------------------------------------------------------ 6

Image gray(int h, int w, const std::function<double(int, int)>& f) {
  Tensor t(Shape{1, 1, h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) t.at(0, 0, y, x) = f(y, x);
  return Image{std::move(t), ColorSpace::y};
}

Report metrics_oracle() {
  Report r;
  const Image a = gray(16, 16, [](int, int) { return 0.5; });
  const Image b = gray(16, 16, [](int, int) { return 0.5 + 10.0 / 255.0; });
  const double closed = 20.0 * std::log10(255.0 / 10.0);
  r.check(std::abs(psnr(a, b, 0) - closed) <= 1e-4,
          "psnr of constants 10/255 apart: " + fmt(psnr(a, b, 0), 8) + " dB vs 20 log10(25.5) = " + fmt(closed, 8));
  r.check(std::isinf(psnr(a, a, 4)), "psnr of identical images is inf");

  std::mt19937_64 rng(9);
  const Image p{oracle::random_tensor({1, 1, 20, 24}, rng, 0, 1), ColorSpace::y};
  const Image q{oracle::random_tensor({1, 1, 20, 24}, rng, 0, 1), ColorSpace::y};
  double se = 0.0;
  for (std::size_t i = 0; i < p.pixels.size(); ++i) se += (p.pixels[i] - q.pixels[i]) * (p.pixels[i] - q.pixels[i]);
  const double direct = 10.0 * std::log10(p.pixels.size() / se);
  r.check(std::abs(psnr(p, q, 0) - direct) <= 1e-4, "psnr of a random pair matches the direct MSE formula (" +
                                                        fmt(psnr(p, q, 0), 8) + " vs " + fmt(direct, 8) + ")");

  auto pattern = [](int y, int x) { return ((x * 7 + y * 13) % 17) / 16.0; };
  auto distorted = [&](int y, int x) {
    return std::clamp(pattern(y, x) + 0.1 * std::sin(0.5 * x + 0.3 * y), 0.0, 1.0);
  };
  // Reference values from an independent SSIM implementation (Gaussian
  // window sigma 1.5, population statistics, data range 1).
  for (auto [h, w, ref] : {std::tuple{24, 20, 0.982343671093}, std::tuple{32, 32, 0.982216731042}}) {
    const double v = ssim(gray(h, w, pattern), gray(h, w, distorted));
    r.check(std::abs(v - ref) <= 1e-4, "ssim fixture " + std::to_string(w) + "x" + std::to_string(h) + ": " +
                                           fmt(v, 12) + " vs reference " + fmt(ref, 12));
  }
  r.check(ssim(p, p) == 1.0, "ssim(x, x) == 1");
  r.check(ssim(p, q) == ssim(q, p), "ssim is symmetric");

  const Tensor noise = oracle::random_tensor({1, 1, 32, 32}, rng);
  const Image clean = gray(32, 32, [](int y, int x) { return 0.25 + 0.02 * ((x + 2 * y) % 25); });
  std::vector<double> levels;
  for (double amp : {0.005, 0.01, 0.02, 0.04, 0.08}) {
    Image noisy = clean;
    for (std::size_t i = 0; i < noise.size(); ++i) noisy.pixels[i] += amp * noise[i];
    levels.push_back(psnr(clean, noisy, 0));
  }
  bool decreasing = true;
  std::ostringstream os;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    os << fmt(levels[i], 5) << (i + 1 < levels.size() ? " > " : "");
    if (i > 0) decreasing = decreasing && levels[i] < levels[i - 1];
  }
  r.check(decreasing, "psnr strictly decreases over 5 noise levels: " + os.str());
  return r;
}

// ------------------------------------------------------------------ 7

Report toy_training() {
  Report r;
  const auto t0 = std::chrono::steady_clock::now();
  ModelConfig c;
  c.scale = 2;
  c.channels = 16;
  c.n_lffb = 2;
  c.m_hffb = 2;
  TrainConfig tc;  // batch 4, patch 48, lr 6e-4, 500 steps
  const auto pairs = synthetic_pairs(8, 2 * tc.patch * c.scale, c.scale, 0);
  Model model = Model::build(c, 1);
  const TrainResult res = train_toy(model, pairs, tc);
  const double head = head_mean(res.loss_curve, 25), tail = tail_mean(res.loss_curve, 25);
  r.check(tail <= 0.5 * head, "500 steps, batch 4, 8 synthetic pairs, x2: smoothed L1 " + fmt(head, 5) + " -> " +
                                  fmt(tail, 5) + " (ratio " + fmt(tail / head, 4) + ", need <= 0.5)");
  r.note("model [" + c.canonical() + "], train [" + tc.canonical() + "]");

  // Single-pair overfit: the training patch is the whole LR image.
  const ImagePair one = make_pair(synthetic_image(96, 96, 77), 2, "overfit");
  TrainConfig oc;
  oc.batch = 1;
  oc.patch = one.lr.height();
  oc.steps = 2000;
  oc.seed = 1;
  Model fit = Model::build(c, 2);
  auto patch_psnr = [&](const Model& m) {
    return psnr(Image::from_tensor(m.forward(one.lr.pixels), ColorSpace::rgb), one.hr, 0);
  };
  const double before = patch_psnr(fit);
  const std::vector<ImagePair> single{one};
  train_toy(fit, single, oc);
  const double after = patch_psnr(fit);
  r.check(after - before >= 5.0, "2000-step single-pair overfit: training-patch PSNR " + fmt(before, 5) + " -> " +
                                     fmt(after, 5) + " dB (gain " + fmt(after - before, 4) + ", need >= 5)");
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  r.check(secs <= 600.0, "runtime " + fmt(secs, 4) + " s (limit 600 s)");
  return r;
}

// ------------------------------------------------------------------ 8

Report ablation_builds() {
  Report r;
  r.note("quality scores of the variants need full-scale training and are not reproduced; this checks the structures");
  struct Variant {
    std::string label;
    std::string ablation;
    int m;
    const char* reference;
  };
  const std::vector<Variant> variants{
      {"HFFN", "full", 5, "867K"},           {"w/o LFDE", "no-lfde", 5, "880K"},
      {"w/o HFE", "no-hfe", 5, "803K"},     {"w/o both branches", "no-hfe,no-lfde", 5, "-"},
      {"w/o DSConv", "no-dsconv", 5, "898K"}, {"w/o CCA (LFDE)", "no-cca", 5, "862K"},
      {"m=4", "full", 4, "705K"},             {"m=6", "full", 6, "1026K"},
      {"w/o LFFB", "no-lffb", 5, "831K"}};
  std::mt19937_64 rng(3);
  const Tensor x = oracle::random_tensor({1, 3, 16, 17}, rng, 0, 1);
  for (const Variant& v : variants) {
    ModelConfig c;
    c.m_hffb = v.m;
    c.ablation = parse_ablation(v.ablation);
    bool ok = false;
    std::string what;
    try {
      const Model m = Model::build(c, 0);
      const Tensor y = m.forward(x);
      ok = y.shape() == Shape{1, 3, 64, 68} && y.all_finite();
      what = std::to_string(m.param_count().total) + " params, " + std::to_string(m.hffb_count()) + " HFFBs";
    } catch (const std::exception& e) {
      what = std::string("threw: ") + e.what();
    }
    r.check(ok, v.label + " [" + c.canonical() + "]: builds and runs forward, " + what + " (reference " + v.reference + ")");
  }
  return r;
}

// ------------------------------------------------------------------ 9

struct RunResult {
  int code = -1;
  std::string out;
};

RunResult run_cli(const std::string& args) {
  RunResult res;
  FILE* pipe = popen((std::string(HFFN_CLI_PATH) + " " + args + " 2>&1").c_str(), "r");
  if (!pipe) return res;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) res.out.append(buf, n);
  const int status = pclose(pipe);
  res.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return res;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

Report end_to_end() {
  Report r;
  const fs::path root = fs::temp_directory_path() / "hffn_acceptance_pipeline";
  fs::remove_all(root);
  const fs::path data = root / "fixture";
  fs::create_directories(data);
  const std::vector<std::pair<int, int>> sizes{{64, 64}, {72, 60}, {80, 80}, {66, 96}};
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    save_png(synthetic_image(sizes[i].first, sizes[i].second, 100 + i), data / ("img" + std::to_string(i) + ".png"));
  }
  const std::string model = "--scale 2 --channels 8 --n-lffb 1 --m-hffb 2 --cca-reduction 2";
  auto q = [](const fs::path& p) { return "'" + p.string() + "'"; };

  std::vector<std::map<std::string, std::string>> outputs;
  for (int run = 0; run < 2; ++run) {
    const fs::path dir = root / ("run" + std::to_string(run));
    fs::create_directories(dir);
    const RunResult t = run_cli("train-toy " + model + " --data-dir " + q(data) +
                                " --steps 30 --batch 2 --patch 16 --seed 3 --init-seed 4 --out-weights " +
                                q(dir / "w.hffn") + " --curve " + q(dir / "loss.csv"));
    const RunResult s = run_cli("sr " + model + " --weights " + q(dir / "w.hffn") + " --input " +
                                q(data / "img1.png") + " --output " + q(dir / "sr.png"));
    const RunResult e = run_cli("eval " + model + " --weights " + q(dir / "w.hffn") + " --hr-dir " + q(data) +
                                " --report " + q(dir / "report.json"));
    r.check(t.code == 0 && s.code == 0 && e.code == 0,
            "run " + std::to_string(run + 1) + ": train-toy -> save -> load -> sr -> eval exit codes " +
                std::to_string(t.code) + "/" + std::to_string(s.code) + "/" + std::to_string(e.code));
    std::map<std::string, std::string> files;
    for (const char* f : {"w.hffn", "loss.csv", "sr.png", "report.json"}) files[f] = slurp(dir / f);
    outputs.push_back(std::move(files));
    if (run == 0 && fs::exists(dir / "sr.png")) {
      const Image sr = load_png(dir / "sr.png");
      r.check(sr.height() == 144 && sr.width() == 120,
              "sr of the 60x72 input is " + std::to_string(sr.width()) + "x" + std::to_string(sr.height()));
    }
  }
  for (const auto& [name, bytes] : outputs[0]) {
    r.check(!bytes.empty() && bytes == outputs[1].at(name),
            name + " identical across the two runs (" + std::to_string(bytes.size()) + " bytes)");
  }
  return r;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Report()>>> criteria{
      {"structural budget", structural_budget},
      {"ablation budget sweep", ablation_sweep},
      {"computational budget", compute_budget},
      {"numerical correctness", numerical_correctness},
      {"block identities", block_identities},
      {"metrics oracle", metrics_oracle},
      {"toy training", toy_training},
      {"ablation structures", ablation_builds},
      {"end-to-end integration", end_to_end}};
  const std::string arg = argc > 1 ? argv[1] : "all";
  std::vector<int> which;
  if (arg == "all") {
    for (int i = 1; i <= 9; ++i) which.push_back(i);
  } else {
    const int n = std::atoi(arg.c_str());
    if (n < 1 || n > 9) {
      std::cerr << "usage: " << argv[0] << " [1-9|all]\n";
      return 2;
    }
    which.push_back(n);
  }
  bool all = true;
  for (int n : which) {
    const auto& [title, fn] = criteria[n - 1];
    Report rep;
    try {
      rep = fn();
    } catch (const std::exception& e) {
      rep.check(false, std::string("threw: ") + e.what());
    }
    std::cout << "criterion " << n << " (" << title << "): " << (rep.pass ? "PASS" : "FAIL") << '\n';
    for (const std::string& l : rep.lines) std::cout << "    " << l << '\n';
    std::cout.flush();
    all = all && rep.pass;
  }
  return all ? 0 : 1;
}
