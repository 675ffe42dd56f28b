#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace berrysmith {

/// One run of foreground pixels over row-major offsets. Runs may wrap rows.
struct Run {
  std::int64_t start = 0;
  std::int64_t length = 0;

  bool operator==(const Run&) const = default;
};

struct BoundingBox {
  int x0 = 0;  ///< inclusive
  int y0 = 0;
  int x1 = 0;  ///< exclusive
  int y1 = 0;

  int width() const { return x1 - x0; }
  int height() const { return y1 - y0; }
  bool operator==(const BoundingBox&) const = default;
};

/// A binary segment over a width x height raster, run-length encoded.
///
/// Runs are kept canonical: sorted, non-overlapping, and separated by at least
/// one background pixel (touching runs are merged on construction). A SegMask
/// is never empty; operations that can produce an empty result return
/// std::nullopt instead.
class SegMask {
 public:
  /// Throws InvalidArgument if the runs are out of range, overlap, are unsorted
  /// or cover no pixel.
  SegMask(int width, int height, std::vector<Run> runs, std::string mask_id = {},
          std::string source_image = {});

  /// Encodes a dense 0/1 plane; returns nullopt when no pixel is set.
  static std::optional<SegMask> from_bitmap(int width, int height,
                                            std::span<const std::uint8_t> bits,
                                            std::string mask_id = {},
                                            std::string source_image = {});

  int width() const { return width_; }
  int height() const { return height_; }
  const std::vector<Run>& runs() const { return runs_; }
  const std::string& mask_id() const { return mask_id_; }
  const std::string& source_image() const { return source_image_; }

  std::int64_t area() const { return area_; }
  BoundingBox bounding_box() const;
  bool contains(int x, int y) const;
  std::vector<std::uint8_t> to_bitmap() const;

  /// Copy with a different id; geometry unchanged.
  SegMask renamed(std::string mask_id) const;

  /// True when the mask has a pixel on the outermost row or column.
  bool touches_border() const;

  template <typename Fn>
  void for_each_pixel(Fn&& fn) const {
    for (const Run& r : runs_) {
      for (std::int64_t off = r.start; off < r.start + r.length; ++off) {
        fn(static_cast<int>(off % width_), static_cast<int>(off / width_));
      }
    }
  }

  bool operator==(const SegMask&) const = default;

 private:
  int width_;
  int height_;
  std::vector<Run> runs_;
  std::string mask_id_;
  std::string source_image_;
  std::int64_t area_ = 0;
};

enum class MaskGenerator { ExternalModel, Fallback, Fixture };

const char* to_string(MaskGenerator g);
std::optional<MaskGenerator> parse_mask_generator(std::string_view s);

/// All segments found in one image. Masks share the raster; ids are unique.
struct MaskSet {
  std::string source_image;
  int width = 0;
  int height = 0;
  MaskGenerator generator = MaskGenerator::Fixture;
  std::vector<SegMask> masks;
  /// Optional producer metadata as compact JSON with sorted keys; empty if absent.
  std::string metadata;

  /// Throws InvalidArgument when a mask has other dimensions, belongs to a
  /// different source image, or an id repeats.
  void validate() const;

  bool operator==(const MaskSet&) const = default;
};

inline std::int64_t area(const SegMask& mask) { return mask.area(); }

/// Keeps the larger half of the masks by area (ceil(n / 2) of them), then only
/// those whose area strictly exceeds the mean area of the whole input set.
/// Relative order is preserved; the result may be empty.
MaskSet filter_masks(const MaskSet& set);

/// Pixel-wise intersection; nullopt when the masks are disjoint. The result
/// carries a's source image and the id "<a>&<b>".
std::optional<SegMask> intersect(const SegMask& a, const SegMask& b);

/// Erosion by a (2r+1)x(2r+1) square; pixels outside the raster count as
/// background. Radius 0 is the identity.
std::optional<SegMask> erode(const SegMask& mask, int radius);

/// Erosion of a dense 0/1 plane, same conventions as erode().
std::vector<std::uint8_t> erode_bitmap(int width, int height, std::span<const std::uint8_t> bits,
                                       int radius);

}  // namespace berrysmith
