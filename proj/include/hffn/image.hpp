#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "hffn/tensor.hpp"

namespace hffn {

class Model;

enum class ColorSpace { rgb, ycbcr, y };

/// Image with pixel values in [0, 1], stored as a (1, C, H, W) tensor.
struct Image {
  Tensor pixels;
  ColorSpace colorspace = ColorSpace::rgb;

  /// Clamps every value into [0, 1].
  static Image from_tensor(Tensor t, ColorSpace cs);

  int channels() const { return pixels.channels(); }
  int height() const { return pixels.height(); }
  int width() const { return pixels.width(); }
};

struct ImagePair {
  Image lr;
  Image hr;
  int scale = 1;
  std::string name;
};

class ImageIoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Reads 8- or 16-bit grayscale/RGB PNG (palette and alpha are expanded or
/// stripped). 8-bit samples map to v/255, 16-bit samples to v/65535.
Image load_png(const std::filesystem::path& path);
/// Writes 8-bit RGB or grayscale; each value is quantized as floor(v*255 + 0.5).
void save_png(const Image& image, const std::filesystem::path& path);
/// The 8-bit code save_png writes for a value in [0, 1].
int quantize8(double v);

/// BT.601 studio-swing luma of an RGB image in [0,1]:
///   Y = 16/255 + (65.738 R + 129.057 G + 25.064 B) / 256
Image rgb_to_y(const Image& image);

/// Resampling factor num/den.
struct Rational {
  int num = 1;
  int den = 1;
  double value() const { return static_cast<double>(num) / den; }
};

/// Cubic convolution kernel with a = -0.5.
double cubic_kernel(double x);

/// Per-output-sample taps for resizing a line of `in_size` samples to
/// `out_size` with scale factor `scale`. Indices are already clamped (edge
/// replication) and weights normalized to sum to one.
struct ResizeTaps {
  std::vector<std::vector<int>> index;
  std::vector<std::vector<double>> weight;
};
ResizeTaps resize_taps(int in_size, int out_size, double scale);

/// Separable bicubic resize (a = -0.5, edge replication). Downscaling widens
/// the kernel by 1/factor (antialiasing). Output size is ceil(size * factor).
Image bicubic_resize(const Image& image, Rational factor);

/// Crops so that height and width are multiples of `scale`.
Image crop_to_multiple(const Image& image, int scale);

/// HR cropped to a multiple of s and its bicubic 1/s LR counterpart.
ImagePair make_pair(const Image& hr, int scale, std::string name = {});

struct Decomposition {
  Image low_map;   // channel-mean |F_lf|, min-max normalized
  Image high_map;  // channel-mean |F_hf|, min-max normalized
  Tensor input;    // F_HF as seen by the block
  Tensor low;      // F_lf
  Tensor high;     // F_hf
  /// Max |F_hf| before normalization; 0 means the high map is uniformly zero.
  double high_max_abs = 0.0;
};

/// Runs the model up to HFFB `block_index` (flattened order) and returns the
/// low/high frequency maps produced inside its HFE branch, at the LR size.
Decomposition decompose(const Image& image, const Model& model, int block_index);

}  // namespace hffn
