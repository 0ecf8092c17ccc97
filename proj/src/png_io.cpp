#include <png.h>

#include <csetjmp>
#include <cstdio>
#include <memory>
#include <vector>

#include "hffn/image.hpp"

namespace hffn {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

void warning_sink(png_structp, png_const_charp) {}

// Keeps libpng quiet on stderr; the message ends up in the exception instead.
void error_sink(png_structp png, png_const_charp msg) {
  if (auto* out = static_cast<std::string*>(png_get_error_ptr(png))) *out = msg;
  png_longjmp(png, 1);
}

}  // namespace

Image load_png(const std::filesystem::path& path) {
  const std::string where = "load_png(" + path.string() + "): ";
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) throw ImageIoError(where + "cannot open file");
  png_byte sig[8];
  if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw ImageIoError(where + "not a PNG file");
  }

  std::string libpng_msg;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &libpng_msg, error_sink, warning_sink);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ImageIoError(where + "out of memory");
  }

  int width = 0, height = 0, channels = 0, depth = 0;
  std::vector<png_byte> raw;
  std::vector<png_bytep> rows;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ImageIoError(where + "corrupt or truncated PNG data (" + libpng_msg + ")");
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  const png_byte color = png_get_color_type(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) {
    png_set_expand_gray_1_2_4_to_8(png);
  }
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  width = static_cast<int>(png_get_image_width(png, info));
  height = static_cast<int>(png_get_image_height(png, info));
  channels = png_get_channels(png, info);
  depth = png_get_bit_depth(png, info);
  const std::size_t stride = png_get_rowbytes(png, info);
  raw.resize(stride * height);
  rows.resize(height);
  for (int h = 0; h < height; ++h) rows[h] = raw.data() + stride * h;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  if (channels != 1 && channels != 3) {
    throw ImageIoError(where + "unsupported channel count " + std::to_string(channels));
  }
  Tensor t(Shape{1, channels, height, width});
  for (int h = 0; h < height; ++h) {
    const png_byte* row = rows[h];
    for (int w = 0; w < width; ++w) {
      for (int c = 0; c < channels; ++c) {
        const std::size_t k = static_cast<std::size_t>(w) * channels + c;
        t.at(0, c, h, w) = depth == 16 ? ((row[2 * k] << 8) | row[2 * k + 1]) / 65535.0
                                       : row[k] / 255.0;
      }
    }
  }
  return Image::from_tensor(std::move(t), channels == 3 ? ColorSpace::rgb : ColorSpace::y);
}

void save_png(const Image& image, const std::filesystem::path& path) {
  const std::string where = "save_png(" + path.string() + "): ";
  const int channels = image.channels();
  if (channels != 1 && channels != 3) {
    throw ImageIoError(where + "expected 1 or 3 channels, got " + std::to_string(channels));
  }
  const int width = image.width(), height = image.height();
  std::vector<png_byte> raw(static_cast<std::size_t>(width) * height * channels);
  for (int h = 0; h < height; ++h) {
    for (int w = 0; w < width; ++w) {
      for (int c = 0; c < channels; ++c) {
        raw[(static_cast<std::size_t>(h) * width + w) * channels + c] =
            static_cast<png_byte>(quantize8(image.pixels.at(0, c, h, w)));
      }
    }
  }

  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw ImageIoError(where + "cannot open file for writing");
  std::string libpng_msg;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &libpng_msg, error_sink, warning_sink);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw ImageIoError(where + "out of memory");
  }
  std::vector<png_bytep> rows(height);
  for (int h = 0; h < height; ++h) {
    rows[h] = raw.data() + static_cast<std::size_t>(h) * width * channels;
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw ImageIoError(where + "write failed (" + libpng_msg + ")");
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, width, height, 8, channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace hffn
