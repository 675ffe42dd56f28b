#pragma once

#include <cstdint>
#include <string>

#include "berrysmith/image.hpp"
#include "berrysmith/seg_mask.hpp"

namespace berrysmith {

/// Otsu's threshold over a 256-bin histogram of rounded intensities.
/// Foreground is intensity > threshold. A single-valued image returns that value.
int otsu_threshold(const ImageGray& img);

/// Crude stand-in for an external segmentation model: Otsu on luminance, then
/// one mask per 8-connected foreground component with area >= min_area.
/// Mask ids are "c0000", "c0001", ... in raster order of each component's
/// first pixel.
MaskSet segment_fallback(const ImageRgb& img, std::int64_t min_area,
                         std::string source_image = {});

}  // namespace berrysmith
