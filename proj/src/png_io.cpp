#include "berrysmith/png_io.hpp"

#include <png.h>

#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include "berrysmith/error.hpp"

namespace berrysmith {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
  FilePtr f(std::fopen(path.c_str(), mode));
  if (!f) throw DataError("cannot open " + path.string());
  return f;
}

[[noreturn]] void png_error_handler(png_structp png, png_const_charp msg) {
  auto* message = static_cast<std::string*>(png_get_error_ptr(png));
  if (message) *message = msg;
  png_longjmp(png, 1);
}

void png_warning_handler(png_structp, png_const_charp) {}

void write_rows(const std::filesystem::path& path, int width, int height, int bit_depth,
                int color_type, const std::vector<std::uint8_t>& packed, std::size_t stride) {
  auto file = open_file(path, "wb");
  std::string message;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &message, png_error_handler,
                                            png_warning_handler);
  if (!png) throw DataError("libpng write init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw DataError("libpng write init failed");
  }
  std::vector<png_bytep> rows(height);
  for (int y = 0; y < height; ++y) {
    rows[y] = const_cast<png_bytep>(packed.data() + static_cast<std::size_t>(y) * stride);
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw DataError("writing " + path.string() + ": " + message);
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, width, height, bit_depth, color_type, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

ImageRgb read_png(const std::filesystem::path& path) {
  auto file = open_file(path, "rb");
  std::uint8_t signature[8];
  if (std::fread(signature, 1, 8, file.get()) != 8 || png_sig_cmp(signature, 0, 8) != 0) {
    throw DataError(path.string() + " is not a PNG file");
  }
  std::string message;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &message, png_error_handler,
                                           png_warning_handler);
  if (!png) throw DataError("libpng read init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw DataError("libpng read init failed");
  }
  std::vector<std::uint8_t> buffer;
  std::vector<png_bytep> rows;
  png_uint_32 width = 0;
  png_uint_32 height = 0;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("decoding " + path.string() + ": " + message);
  }
  png_init_io(png, file.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);
  width = png_get_image_width(png, info);
  height = png_get_image_height(png, info);
  const int color_type = png_get_color_type(png, info);
  const int bit_depth = png_get_bit_depth(png, info);

  if (bit_depth == 16) png_set_strip_16(png);
  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA) {
    png_set_gray_to_rgb(png);
  }
  png_set_strip_alpha(png);
  png_read_update_info(png, info);

  const std::size_t stride = png_get_rowbytes(png, info);
  if (stride != static_cast<std::size_t>(width) * 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError(path.string() + ": unsupported PNG layout");
  }
  buffer.resize(stride * height);
  rows.resize(height);
  for (png_uint_32 y = 0; y < height; ++y) rows[y] = buffer.data() + y * stride;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return ImageRgb(static_cast<int>(width), static_cast<int>(height), std::move(buffer));
}

void write_png(const std::filesystem::path& path, const ImageRgb& img) {
  std::vector<std::uint8_t> packed(img.pixels().begin(), img.pixels().end());
  write_rows(path, img.width(), img.height(), 8, PNG_COLOR_TYPE_RGB, packed,
             static_cast<std::size_t>(img.width()) * 3);
}

void write_png_gray(const std::filesystem::path& path, int width, int height,
                    std::span<const std::uint8_t> pixels) {
  if (pixels.size() != static_cast<std::size_t>(width) * height) {
    throw InvalidArgument("gray PNG buffer has the wrong length");
  }
  std::vector<std::uint8_t> packed(pixels.begin(), pixels.end());
  write_rows(path, width, height, 8, PNG_COLOR_TYPE_GRAY, packed, width);
}

void write_png_bilevel(const std::filesystem::path& path, int width, int height,
                       std::span<const std::uint8_t> bits) {
  if (bits.size() != static_cast<std::size_t>(width) * height) {
    throw InvalidArgument("bilevel PNG buffer has the wrong length");
  }
  const std::size_t stride = (static_cast<std::size_t>(width) + 7) / 8;
  std::vector<std::uint8_t> packed(stride * height, 0);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      if (bits[static_cast<std::size_t>(y) * width + x]) {
        packed[y * stride + x / 8] |= static_cast<std::uint8_t>(0x80u >> (x % 8));
      }
    }
  }
  write_rows(path, width, height, 1, PNG_COLOR_TYPE_GRAY, packed, stride);
}

}  // namespace berrysmith
