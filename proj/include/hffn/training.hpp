#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "hffn/autodiff.hpp"
#include "hffn/image.hpp"
#include "hffn/network.hpp"

namespace hffn {

struct TrainConfig {
  int batch = 4;
  int patch = 48;  // LR pixels
  double lr_init = 6e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int steps = 500;
  std::uint64_t seed = 0;
  /// Random flips/rotations per sample.
  bool augment = true;

  void validate() const;
  std::string canonical() const;
};

struct OptimizerState {
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
  std::int64_t step = 0;

  static OptimizerState zeros_like(const ParameterStore& weights);
};

class TrainingError : public NumericError {
 public:
  TrainingError(const std::string& what, int step, double loss, double grad_norm)
      : NumericError(what), step(step), loss(loss), grad_norm(grad_norm) {}
  int step;
  double loss;
  double grad_norm;
};

/// Mean absolute error.
double l1_loss(const Tensor& sr, const Tensor& hr);

/// One Adam update with bias correction. Every weight needs a gradient
/// keyed by its ParamId.
void adam_step(ParameterStore& weights, const Gradients& grads, OptimizerState& state,
               const TrainConfig& config);

struct Batch {
  Tensor lr;
  Tensor hr;
  struct Sample {
    std::size_t pair = 0;
    int lr_y = 0;
    int lr_x = 0;
    int transform = 0;  // dihedral index
  };
  std::vector<Sample> samples;
};

/// Random aligned crops: LR patch at (y, x), HR patch of size patch*s at
/// (y*s, x*s); each sample gets one dihedral transform applied to both.
Batch sample_batch(std::span<const ImagePair> pairs, const TrainConfig& config,
                   std::mt19937_64& rng);

struct TrainResult {
  std::vector<double> loss_curve;
};

using ProgressFn = std::function<void(int step, double loss)>;

/// Forward, L1 loss, backward and Adam for config.steps iterations.
/// Throws TrainingError on a non-finite loss or gradient.
TrainResult train_toy(Model& model, std::span<const ImagePair> pairs, const TrainConfig& config,
                      const ProgressFn& progress = {});

/// Mean of the first and last `window` entries of a curve.
double head_mean(std::span<const double> curve, std::size_t window);
double tail_mean(std::span<const double> curve, std::size_t window);

/// Deterministic synthetic HR images (smooth gradients, stripes and
/// hard-edged shapes) and their bicubic LR counterparts.
std::vector<ImagePair> synthetic_pairs(int count, int hr_size, int scale, std::uint64_t seed);
Image synthetic_image(int height, int width, std::uint64_t seed);

void write_loss_csv(std::span<const double> curve, const std::filesystem::path& path);
/// Loss curve rasterized as a grayscale plot.
Image render_loss_plot(std::span<const double> curve, int width = 640, int height = 360);

}  // namespace hffn
