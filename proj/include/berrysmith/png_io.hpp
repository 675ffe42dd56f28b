#pragma once

#include <cstdint>
#include <filesystem>
#include <span>

#include "berrysmith/image.hpp"

namespace berrysmith {

/// Loads an 8- or 16-bit PNG (gray, gray+alpha, RGB, RGBA or palette) as RGB.
/// Alpha is dropped. Throws DataError on I/O or decode failure.
ImageRgb read_png(const std::filesystem::path& path);

/// Writes an 8-bit RGB PNG. Output bytes depend only on the pixels.
void write_png(const std::filesystem::path& path, const ImageRgb& img);

/// Writes an 8-bit grayscale PNG, one byte per pixel.
void write_png_gray(const std::filesystem::path& path, int width, int height,
                    std::span<const std::uint8_t> pixels);

/// Writes a 1-bit PNG; any non-zero entry of `bits` is white.
void write_png_bilevel(const std::filesystem::path& path, int width, int height,
                       std::span<const std::uint8_t> bits);

}  // namespace berrysmith
