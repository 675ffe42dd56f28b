#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace berrysmith {

/// Interleaved 8-bit RGB raster, row-major.
class ImageRgb {
 public:
  ImageRgb(int width, int height);
  ImageRgb(int width, int height, std::vector<std::uint8_t> pixels);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width_) * height_; }

  std::uint8_t at(int x, int y, int channel) const { return pixels_[index(x, y) + channel]; }
  std::uint8_t& at(int x, int y, int channel) { return pixels_[index(x, y) + channel]; }

  std::span<const std::uint8_t> pixels() const { return pixels_; }
  std::span<std::uint8_t> pixels() { return pixels_; }

  bool operator==(const ImageRgb&) const = default;

 private:
  std::size_t index(int x, int y) const {
    return (static_cast<std::size_t>(y) * width_ + x) * 3;
  }

  int width_;
  int height_;
  std::vector<std::uint8_t> pixels_;
};

/// Single-channel intensities in [0, 255] held at double precision.
class ImageGray {
 public:
  ImageGray(int width, int height, double fill = 0.0);
  ImageGray(int width, int height, std::vector<double> pixels);

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width_) * height_; }

  double at(int x, int y) const { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }
  double& at(int x, int y) { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }

  std::span<const double> pixels() const { return pixels_; }
  std::span<double> pixels() { return pixels_; }

  bool operator==(const ImageGray&) const = default;

 private:
  int width_;
  int height_;
  std::vector<double> pixels_;
};

/// Per-pixel image derivatives. `magnitude` is the plain Euclidean norm of
/// (gx, gy); `direction` is atan2(gy, gx) in radians with y pointing down.
struct GradientField {
  int width = 0;
  int height = 0;
  std::vector<double> gx;
  std::vector<double> gy;
  std::vector<double> magnitude;
  std::vector<double> direction;
};

/// Rec. 601 luminance.
ImageGray to_grayscale(const ImageRgb& img);

/// Blur sigma used for a K-tap kernel when the caller does not pick one:
/// 0.3 * ((K - 1) / 2 - 1) + 0.8.
double sigma_for_kernel(int kernel_size);

/// Normalized 1-D Gaussian taps of length `kernel_size`.
std::vector<double> gaussian_kernel(int kernel_size, double sigma);

/// Separable Gaussian blur with edge replication. K = 1 returns a copy of the
/// input. Throws InvalidArgument for even or non-positive K and sigma <= 0.
ImageGray gaussian_blur(const ImageGray& img, int kernel_size, double sigma);

/// 3x3 Sobel derivatives with replicated borders. Requires a 3x3 image or larger.
GradientField sobel_gradients(const ImageGray& img);

}  // namespace berrysmith
