#include "hffn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include "json.hpp"

namespace hffn {
namespace {

void require_same_dims(const Image& a, const Image& b, const char* op) {
  if (a.pixels.shape() != b.pixels.shape()) {
    throw std::invalid_argument(std::string(op) + ": dimension mismatch " +
                                a.pixels.shape().str() + " vs " + b.pixels.shape().str());
  }
}

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;

std::vector<double> gaussian_window() {
  std::vector<double> g(kWindow);
  double total = 0.0;
  for (int i = 0; i < kWindow; ++i) {
    const double d = i - kWindow / 2;
    g[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
    total += g[i];
  }
  for (double& v : g) v /= total;
  return g;
}

// Separable weighted sums over every fully-contained window.
std::vector<double> filter_valid(const std::vector<double>& img, int h, int w,
                                 const std::vector<double>& g) {
  const int oh = h - kWindow + 1, ow = w - kWindow + 1;
  std::vector<double> rows(static_cast<std::size_t>(h) * ow);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int k = 0; k < kWindow; ++k) acc += g[k] * img[static_cast<std::size_t>(y) * w + x + k];
      rows[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int k = 0; k < kWindow; ++k) acc += g[k] * rows[static_cast<std::size_t>(y + k) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  }
  return out;
}

}  // namespace

double psnr(const Image& a, const Image& b, int shave) {
  require_same_dims(a, b, "psnr");
  if (shave < 0) throw std::invalid_argument("psnr: shave must be non-negative");
  const int h = a.height(), w = a.width();
  if (h <= 2 * shave || w <= 2 * shave) throw std::invalid_argument("psnr: shave removes the whole image");
  double se = 0.0;
  std::size_t n = 0;
  for (int c = 0; c < a.channels(); ++c) {
    for (int y = shave; y < h - shave; ++y) {
      for (int x = shave; x < w - shave; ++x) {
        const double d = a.pixels.at(0, c, y, x) - b.pixels.at(0, c, y, x);
        se += d * d;
        ++n;
      }
    }
  }
  if (se == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / (se / static_cast<double>(n)));
}

double ssim(const Image& a, const Image& b) {
  require_same_dims(a, b, "ssim");
  if (a.channels() != 1) throw std::invalid_argument("ssim: expected single-channel images");
  const int h = a.height(), w = a.width();
  if (h < kWindow || w < kWindow) {
    throw std::invalid_argument("ssim: image must be at least 11x11, got " +
                                std::to_string(w) + "x" + std::to_string(h));
  }
  const auto g = gaussian_window();
  const std::size_t n = static_cast<std::size_t>(h) * w;
  std::vector<double> x(a.pixels.ptr(), a.pixels.ptr() + n), y(b.pixels.ptr(), b.pixels.ptr() + n);
  std::vector<double> xx(n), yy(n), xy(n);
  for (std::size_t i = 0; i < n; ++i) {
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  const auto mx = filter_valid(x, h, w, g), my = filter_valid(y, h, w, g);
  const auto sxx = filter_valid(xx, h, w, g), syy = filter_valid(yy, h, w, g),
             sxy = filter_valid(xy, h, w, g);
  constexpr double c1 = (0.01 * 1.0) * (0.01 * 1.0);
  constexpr double c2 = (0.03 * 1.0) * (0.03 * 1.0);
  double total = 0.0;
  for (std::size_t i = 0; i < mx.size(); ++i) {
    const double vx = sxx[i] - mx[i] * mx[i];
    const double vy = syy[i] - my[i] * my[i];
    const double cov = sxy[i] - mx[i] * my[i];
    total += ((2 * mx[i] * my[i] + c1) * (2 * cov + c2)) /
             ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
  }
  return total / static_cast<double>(mx.size());
}

ImageScore score_y(const std::string& name, const Image& sr, const Image& hr, int shave) {
  Image ys = sr.colorspace == ColorSpace::y ? sr : rgb_to_y(sr);
  Image yh = hr.colorspace == ColorSpace::y ? hr : rgb_to_y(hr);
  if (shave > 0) {
    const int h = ys.height() - 2 * shave, w = ys.width() - 2 * shave;
    if (h < 1 || w < 1) throw std::invalid_argument("score_y: image smaller than the shave border");
    auto inner = [&](const Image& im) {
      Tensor t(Shape{1, 1, h, w});
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) t.at(0, 0, y, x) = im.pixels.at(0, 0, y + shave, x + shave);
      }
      return Image{std::move(t), ColorSpace::y};
    };
    ys = inner(ys);
    yh = inner(yh);
  }
  return ImageScore{name, psnr(ys, yh, 0), ssim(ys, yh)};
}

void EvalReport::finalize() {
  std::sort(per_image.begin(), per_image.end(),
            [](const ImageScore& a, const ImageScore& b) { return a.name < b.name; });
  mean_psnr = mean_ssim = 0.0;
  if (per_image.empty()) return;
  for (const ImageScore& s : per_image) {
    mean_psnr += s.psnr;
    mean_ssim += s.ssim;
  }
  mean_psnr /= static_cast<double>(per_image.size());
  mean_ssim /= static_cast<double>(per_image.size());
}

namespace {

nlohmann::json psnr_json(double v) {
  if (std::isinf(v)) return "inf";
  return v;
}

}  // namespace

std::string EvalReport::to_json() const {
  nlohmann::json j;
  j["dataset"] = dataset;
  j["scale"] = scale;
  j["per_image"] = nlohmann::json::array();
  for (const ImageScore& s : per_image) {
    j["per_image"].push_back({{"name", s.name}, {"psnr", psnr_json(s.psnr)}, {"ssim", s.ssim}});
  }
  j["mean_psnr"] = psnr_json(mean_psnr);
  j["mean_ssim"] = mean_ssim;
  return j.dump(2);
}

std::string EvalReport::to_text() const {
  std::ostringstream os;
  os << std::fixed << std::setprecision(4);
  os << "dataset " << dataset << " scale x" << scale << " images " << per_image.size() << '\n';
  for (const ImageScore& s : per_image) {
    os << s.name << "  psnr " << s.psnr << "  ssim " << s.ssim << '\n';
  }
  os << "mean  psnr " << mean_psnr << "  ssim " << mean_ssim << '\n';
  return os.str();
}

}  // namespace hffn
