#pragma once

#include <cstdint>
#include <span>
#include <tuple>
#include <vector>

#include "berrysmith/image.hpp"
#include "berrysmith/seg_mask.hpp"

namespace berrysmith {

/// Sobel magnitudes are multiplied by this before thresholding, dividing out
/// the stencil gain of 4 so thresholds read in 8-bit intensity units.
inline constexpr double kMagnitudeScale = 0.25;

/// Absolute slack on every magnitude comparison (thresholds and non-maximum
/// suppression). Differences below it are treated as ties; it absorbs
/// rounding noise, not signal.
inline constexpr double kMagnitudeTolerance = 1e-7;

/// Binary edge plane, 1 = edge.
struct EdgeMap {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> edges;

  std::int64_t count() const;
  bool operator==(const EdgeMap&) const = default;
};

/// Hysteresis pair in scaled magnitude units, 0 <= th_min < th_max.
struct CannyThresholds {
  double th_min = 0.0;
  double th_max = 0.0;

  bool valid() const { return th_min >= 0.0 && th_min < th_max; }
  bool operator==(const CannyThresholds&) const = default;
};

/// Blur size plus the wide and narrow hysteresis pairs.
struct DcedParams {
  int kernel_size = 3;
  CannyThresholds wide;
  CannyThresholds narrow;

  /// wth_max > wth_min, nth_min >= wth_min, nth_max > nth_min, nth_max > wth_max,
  /// wth_min >= 0 and an odd positive kernel.
  bool valid() const;
  /// Throws InvalidArgument when !valid().
  void validate() const;

  auto key() const {
    return std::make_tuple(kernel_size, wide.th_min, wide.th_max, narrow.th_min, narrow.th_max);
  }
  bool operator==(const DcedParams&) const = default;
};

struct DcedResult {
  EdgeMap wide;
  EdgeMap narrow;
  EdgeMap diff;  ///< wide AND NOT narrow
  std::int64_t wide_count = 0;
  std::int64_t narrow_count = 0;
  std::int64_t diff_count = 0;
};

/// Scaled gradient magnitude after non-maximum suppression; suppressed pixels
/// hold 0. Depends only on the image and the blur size, so every threshold
/// pair evaluated on one image can share it.
struct SuppressedMagnitude {
  int width = 0;
  int height = 0;
  std::vector<double> values;
};

/// Blur (K, sigma_for_kernel(K)), Sobel, scale, then 4-direction NMS.
SuppressedMagnitude suppress_non_maxima(const ImageGray& img, int kernel_size);

/// Double threshold with 8-connected hysteresis.
EdgeMap hysteresis(const SuppressedMagnitude& magnitude, CannyThresholds t);

/// Edge counts of hysteresis(magnitude, {th_min, th_max}) for every th_max in
/// `th_maxes`, from a single connected-component pass over the weak pixels.
std::vector<std::int64_t> hysteresis_counts(const SuppressedMagnitude& magnitude, double th_min,
                                            std::span<const double> th_maxes);

EdgeMap canny(const ImageGray& img, CannyThresholds t, int kernel_size);

DcedResult dced(const ImageGray& img, const DcedParams& p);
DcedResult dced(const SuppressedMagnitude& magnitude, const DcedParams& p);

struct MaskedEdgeStats {
  std::int64_t diff_count = 0;
  std::int64_t mask_count = 0;
  double edge_ratio = 0.0;
  /// Counting region vanished after erosion; edge_ratio forced to 0.
  bool eroded_empty = false;
};

/// Radius of the erosion that keeps blur and stencil halos out of the counts.
int edge_guard_radius(int kernel_size);

/// Edge statistics of one segment. The image is cropped to the mask's box
/// (padded by (K-1)/2 + 1), pixels outside the mask are zeroed, and both
/// Canny passes run on the crop. Edge pixels are counted inside the mask
/// eroded by edge_guard_radius(K), or inside the mask itself when
/// `erode_guard` is false. The ratio is over the uneroded mask area.
MaskedEdgeStats masked_edge_stats(const ImageGray& img, const SegMask& mask,
                                  const DcedParams& p, bool erode_guard = true);

}  // namespace berrysmith
