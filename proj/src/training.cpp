#include "hffn/training.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

#include "hffn/ops.hpp"

namespace hffn {

void TrainConfig::validate() const {
  if (batch < 1) throw std::invalid_argument("train config: batch must be >= 1");
  if (patch < 2 || patch % 2 != 0) throw std::invalid_argument("train config: patch must be even");
  if (!(lr_init > 0)) throw std::invalid_argument("train config: lr_init must be > 0");
  if (!(eps > 0)) throw std::invalid_argument("train config: eps must be > 0");
  if (steps < 1) throw std::invalid_argument("train config: steps must be >= 1");
}

std::string TrainConfig::canonical() const {
  std::ostringstream os;
  os << "batch=" << batch << " patch=" << patch << " lr=" << lr_init << " betas=(" << beta1
     << "," << beta2 << ") eps=" << eps << " steps=" << steps << " seed=" << seed
     << " augment=" << (augment ? "on" : "off");
  return os.str();
}

OptimizerState OptimizerState::zeros_like(const ParameterStore& weights) {
  OptimizerState s;
  for (const Tensor& w : weights.values()) {
    s.first_moment.emplace_back(w.shape());
    s.second_moment.emplace_back(w.shape());
  }
  return s;
}

double l1_loss(const Tensor& sr, const Tensor& hr) { return ops::l1_mean(sr, hr); }

void adam_step(ParameterStore& weights, const Gradients& grads, OptimizerState& state,
               const TrainConfig& config) {
  if (state.first_moment.size() != weights.size()) state = OptimizerState::zeros_like(weights);
  for (ParamId i = 0; i < weights.size(); ++i) {
    if (!grads.contains(i)) {
      throw std::invalid_argument("adam_step: missing gradient for '" + weights.name(i) + "'");
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  for (ParamId i = 0; i < weights.size(); ++i) {
    Tensor& w = weights[i];
    const Tensor& g = grads.at(i);
    require_shape(g.shape() == w.shape(), "adam_step", "gradient shape mismatch for '" +
                                                          weights.name(i) + "'");
    Tensor& m = state.first_moment[i];
    Tensor& v = state.second_moment[i];
    for (std::size_t k = 0; k < w.size(); ++k) {
      m[k] = config.beta1 * m[k] + (1.0 - config.beta1) * g[k];
      v[k] = config.beta2 * v[k] + (1.0 - config.beta2) * g[k] * g[k];
      w[k] -= config.lr_init * (m[k] / c1) / (std::sqrt(v[k] / c2) + config.eps);
    }
  }
}

Batch sample_batch(std::span<const ImagePair> pairs, const TrainConfig& config,
                   std::mt19937_64& rng) {
  if (pairs.empty()) throw std::invalid_argument("sample_batch: no image pairs");
  for (const ImagePair& p : pairs) {
    if (p.lr.height() < config.patch || p.lr.width() < config.patch) {
      throw std::invalid_argument("sample_batch: image '" + p.name + "' (" +
                                  std::to_string(p.lr.width()) + "x" +
                                  std::to_string(p.lr.height()) + " LR) is smaller than patch " +
                                  std::to_string(config.patch));
    }
    if (p.hr.height() != p.lr.height() * p.scale || p.hr.width() != p.lr.width() * p.scale) {
      throw std::invalid_argument("sample_batch: image '" + p.name + "' HR is not LR x scale");
    }
  }
  const int s = pairs.front().scale;
  const int p = config.patch;
  Batch batch;
  std::vector<Tensor> lrs, hrs;
  std::uniform_int_distribution<std::size_t> pick(0, pairs.size() - 1);
  std::uniform_int_distribution<int> transform(0, 7);
  for (int i = 0; i < config.batch; ++i) {
    Batch::Sample sample;
    sample.pair = pick(rng);
    const ImagePair& pair = pairs[sample.pair];
    sample.lr_y = std::uniform_int_distribution<int>(0, pair.lr.height() - p)(rng);
    sample.lr_x = std::uniform_int_distribution<int>(0, pair.lr.width() - p)(rng);
    sample.transform = config.augment ? transform(rng) : 0;

    Tensor lr(Shape{1, 3, p, p});
    Tensor hr(Shape{1, 3, p * s, p * s});
    for (int c = 0; c < 3; ++c) {
      for (int y = 0; y < p; ++y) {
        for (int x = 0; x < p; ++x) {
          lr.at(0, c, y, x) = pair.lr.pixels.at(0, c, sample.lr_y + y, sample.lr_x + x);
        }
      }
      for (int y = 0; y < p * s; ++y) {
        for (int x = 0; x < p * s; ++x) {
          hr.at(0, c, y, x) = pair.hr.pixels.at(0, c, sample.lr_y * s + y, sample.lr_x * s + x);
        }
      }
    }
    lrs.push_back(ops::dihedral(lr, sample.transform));
    hrs.push_back(ops::dihedral(hr, sample.transform));
    batch.samples.push_back(sample);
  }
  // Stack along the batch axis.
  auto stack = [](const std::vector<Tensor>& items) {
    Shape shape = items.front().shape();
    shape.batch = static_cast<int>(items.size());
    Tensor out(shape);
    double* dst = out.ptr();
    for (const Tensor& t : items) dst = std::copy(t.data().begin(), t.data().end(), dst);
    return out;
  };
  batch.lr = stack(lrs);
  batch.hr = stack(hrs);
  return batch;
}

namespace {

double grad_norm(const Gradients& grads) {
  double acc = 0.0;
  for (const auto& [id, g] : grads) {
    for (double v : g.data()) acc += v * v;
  }
  return std::sqrt(acc);
}

}  // namespace

TrainResult train_toy(Model& model, std::span<const ImagePair> pairs, const TrainConfig& config,
                      const ProgressFn& progress) {
  config.validate();
  for (const ImagePair& p : pairs) {
    if (p.scale != model.config().scale) {
      throw std::invalid_argument("train_toy: pair '" + p.name + "' has scale " +
                                  std::to_string(p.scale) + " but the model is x" +
                                  std::to_string(model.config().scale));
    }
  }
  std::mt19937_64 rng(config.seed);
  OptimizerState state = OptimizerState::zeros_like(model.params());
  TrainResult result;
  result.loss_curve.reserve(config.steps);
  for (int step = 0; step < config.steps; ++step) {
    Batch batch = sample_batch(pairs, config, rng);
    Tape tape;
    TapeContext ctx = TapeContext::with_leaves(tape, model.params());
    Var sr = model.forward(ctx, tape.constant(std::move(batch.lr)));
    Var loss = ad::l1_loss(sr, tape.constant(std::move(batch.hr)));
    const double loss_value = tape.value(loss).item();
    Gradients grads = tape.backward(loss);
    const double norm = grad_norm(grads);
    if (!std::isfinite(loss_value) || !std::isfinite(norm)) {
      std::ostringstream os;
      os << "train_toy: non-finite training state at step " << step << " (loss " << loss_value
         << ", grad norm " << norm << ")";
      throw TrainingError(os.str(), step, loss_value, norm);
    }
    adam_step(model.params(), grads, state, config);
    result.loss_curve.push_back(loss_value);
    if (progress) progress(step, loss_value);
  }
  return result;
}

double head_mean(std::span<const double> curve, std::size_t window) {
  window = std::min(window, curve.size());
  if (window == 0) throw std::invalid_argument("head_mean: empty curve");
  double acc = 0.0;
  for (std::size_t i = 0; i < window; ++i) acc += curve[i];
  return acc / static_cast<double>(window);
}

double tail_mean(std::span<const double> curve, std::size_t window) {
  window = std::min(window, curve.size());
  if (window == 0) throw std::invalid_argument("tail_mean: empty curve");
  double acc = 0.0;
  for (std::size_t i = curve.size() - window; i < curve.size(); ++i) acc += curve[i];
  return acc / static_cast<double>(window);
}

Image synthetic_image(int height, int width, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Tensor t(Shape{1, 3, height, width});

  // Smooth colour gradient background.
  double base[3], gy[3], gx[3];
  for (int c = 0; c < 3; ++c) {
    base[c] = 0.2 + 0.4 * u(rng);
    gy[c] = 0.3 * (u(rng) - 0.5);
    gx[c] = 0.3 * (u(rng) - 0.5);
  }
  // Oriented stripes.
  const double freq = 2.0 * std::numbers::pi * (0.04 + 0.08 * u(rng));
  const double angle = std::numbers::pi * u(rng);
  const double amp = 0.1 + 0.1 * u(rng);
  for (int c = 0; c < 3; ++c) {
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        const double ny = static_cast<double>(y) / height, nx = static_cast<double>(x) / width;
        const double phase = freq * (x * std::cos(angle) + y * std::sin(angle));
        t.at(0, c, y, x) = base[c] + gy[c] * ny + gx[c] * nx + amp * std::sin(phase);
      }
    }
  }
  // Hard-edged rectangles and disks.
  for (int k = 0; k < 6; ++k) {
    const bool disk = u(rng) < 0.5;
    const double cy = u(rng) * height, cx = u(rng) * width;
    const double ry = (0.08 + 0.2 * u(rng)) * height, rx = (0.08 + 0.2 * u(rng)) * width;
    double colour[3];
    for (double& v : colour) v = u(rng);
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        const double dy = (y - cy) / ry, dx = (x - cx) / rx;
        const bool inside = disk ? dy * dy + dx * dx <= 1.0 : std::abs(dy) <= 1 && std::abs(dx) <= 1;
        if (!inside) continue;
        for (int c = 0; c < 3; ++c) t.at(0, c, y, x) = colour[c];
      }
    }
  }
  return Image::from_tensor(std::move(t), ColorSpace::rgb);
}

std::vector<ImagePair> synthetic_pairs(int count, int hr_size, int scale, std::uint64_t seed) {
  std::vector<ImagePair> pairs;
  for (int i = 0; i < count; ++i) {
    pairs.push_back(make_pair(synthetic_image(hr_size, hr_size, seed + 7919 * i), scale,
                              "synthetic_" + std::to_string(i)));
  }
  return pairs;
}

void write_loss_csv(std::span<const double> curve, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write loss curve to " + path.string());
  out << "step,loss\n" << std::setprecision(17);
  for (std::size_t i = 0; i < curve.size(); ++i) out << i << ',' << curve[i] << '\n';
}

Image render_loss_plot(std::span<const double> curve, int width, int height) {
  Tensor t(Shape{1, 1, height, width}, 1.0);
  if (curve.empty()) return Image{std::move(t), ColorSpace::y};
  const auto [lo, hi] = std::minmax_element(curve.begin(), curve.end());
  const double range = *hi - *lo > 0 ? *hi - *lo : 1.0;
  const int margin = 8;
  const int pw = width - 2 * margin, ph = height - 2 * margin;
  auto to_row = [&](double v) {
    return margin + static_cast<int>(std::lround((1.0 - (v - *lo) / range) * (ph - 1)));
  };
  for (int x = margin; x < margin + pw; ++x) t.at(0, 0, margin + ph - 1, x) = 0.6;
  for (int y = margin; y < margin + ph; ++y) t.at(0, 0, y, margin) = 0.6;
  int prev = -1;
  for (int x = 0; x < pw; ++x) {
    const std::size_t i = curve.size() == 1 ? 0 : x * (curve.size() - 1) / (pw - 1);
    const int row = to_row(curve[i]);
    const int a = prev < 0 ? row : std::min(prev, row), b = prev < 0 ? row : std::max(prev, row);
    for (int y = a; y <= b; ++y) t.at(0, 0, y, margin + x) = 0.0;
    prev = row;
  }
  return Image{std::move(t), ColorSpace::y};
}

}  // namespace hffn
