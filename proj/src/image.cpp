#include "berrysmith/image.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "berrysmith/error.hpp"

namespace berrysmith {

namespace {

void check_dimensions(int width, int height) {
  if (width < 1 || height < 1) {
    throw InvalidArgument("image dimensions must be positive, got " + std::to_string(width) +
                          "x" + std::to_string(height));
  }
}

}  // namespace

ImageRgb::ImageRgb(int width, int height) : width_(width), height_(height) {
  check_dimensions(width, height);
  pixels_.assign(pixel_count() * 3, 0);
}

ImageRgb::ImageRgb(int width, int height, std::vector<std::uint8_t> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
  check_dimensions(width, height);
  if (pixels_.size() != pixel_count() * 3) {
    throw InvalidArgument("RGB buffer length does not match width * height * 3");
  }
}

ImageGray::ImageGray(int width, int height, double fill) : width_(width), height_(height) {
  check_dimensions(width, height);
  pixels_.assign(pixel_count(), fill);
}

ImageGray::ImageGray(int width, int height, std::vector<double> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
  check_dimensions(width, height);
  if (pixels_.size() != pixel_count()) {
    throw InvalidArgument("gray buffer length does not match width * height");
  }
  for (double v : pixels_) {
    if (!std::isfinite(v) || v < 0.0 || v > 255.0) {
      throw InvalidArgument("gray intensities must be finite and within [0, 255]");
    }
  }
}

ImageGray to_grayscale(const ImageRgb& img) {
  ImageGray out(img.width(), img.height());
  auto src = img.pixels();
  auto dst = out.pixels();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    const double v = 0.299 * src[3 * i] + 0.587 * src[3 * i + 1] + 0.114 * src[3 * i + 2];
    dst[i] = std::clamp(v, 0.0, 255.0);
  }
  return out;
}

double sigma_for_kernel(int kernel_size) {
  return 0.3 * ((kernel_size - 1) * 0.5 - 1.0) + 0.8;
}

std::vector<double> gaussian_kernel(int kernel_size, double sigma) {
  if (kernel_size < 1 || kernel_size % 2 == 0) {
    throw InvalidArgument("Gaussian kernel size must be odd and positive, got " +
                          std::to_string(kernel_size));
  }
  if (!(sigma > 0.0)) {
    throw InvalidArgument("Gaussian sigma must be positive");
  }
  const int half = kernel_size / 2;
  std::vector<double> taps(kernel_size);
  double sum = 0.0;
  for (int i = -half; i <= half; ++i) {
    taps[i + half] = std::exp(-(i * i) / (2.0 * sigma * sigma));
    sum += taps[i + half];
  }
  for (double& t : taps) t /= sum;
  return taps;
}

ImageGray gaussian_blur(const ImageGray& img, int kernel_size, double sigma) {
  const auto taps = gaussian_kernel(kernel_size, sigma);
  if (kernel_size == 1) return img;

  const int w = img.width();
  const int h = img.height();
  const int half = kernel_size / 2;

  // Each output is a convex combination of its window, so it is clamped to the
  // window range; this keeps constant regions exactly constant.
  std::vector<double> tmp(img.pixel_count());
  auto src = img.pixels();
  for (int y = 0; y < h; ++y) {
    const double* row = src.data() + static_cast<std::size_t>(y) * w;
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      double lo = row[x];
      double hi = row[x];
      for (int k = -half; k <= half; ++k) {
        const double v = row[std::clamp(x + k, 0, w - 1)];
        acc += taps[k + half] * v;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      tmp[static_cast<std::size_t>(y) * w + x] = std::clamp(acc, lo, hi);
    }
  }

  ImageGray out(w, h);
  auto dst = out.pixels();
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      double lo = tmp[static_cast<std::size_t>(y) * w + x];
      double hi = lo;
      for (int k = -half; k <= half; ++k) {
        const double v = tmp[static_cast<std::size_t>(std::clamp(y + k, 0, h - 1)) * w + x];
        acc += taps[k + half] * v;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      dst[static_cast<std::size_t>(y) * w + x] = std::clamp(acc, lo, hi);
    }
  }
  return out;
}

GradientField sobel_gradients(const ImageGray& img) {
  const int w = img.width();
  const int h = img.height();
  if (w < 3 || h < 3) {
    throw InvalidArgument("Sobel gradients need an image of at least 3x3");
  }
  GradientField g;
  g.width = w;
  g.height = h;
  const std::size_t n = img.pixel_count();
  g.gx.resize(n);
  g.gy.resize(n);
  g.magnitude.resize(n);
  g.direction.resize(n);

  auto px = [&](int x, int y) { return img.at(std::clamp(x, 0, w - 1), std::clamp(y, 0, h - 1)); };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double a = px(x - 1, y - 1), b = px(x, y - 1), c = px(x + 1, y - 1);
      const double d = px(x - 1, y), f = px(x + 1, y);
      const double gg = px(x - 1, y + 1), hh = px(x, y + 1), ii = px(x + 1, y + 1);
      const double dx = (c + 2.0 * f + ii) - (a + 2.0 * d + gg);
      const double dy = (gg + 2.0 * hh + ii) - (a + 2.0 * b + c);
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      g.gx[i] = dx;
      g.gy[i] = dy;
      g.magnitude[i] = std::sqrt(dx * dx + dy * dy);
      g.direction[i] = std::atan2(dy, dx);
    }
  }
  return g;
}

}  // namespace berrysmith
