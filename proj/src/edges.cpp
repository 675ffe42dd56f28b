#include "berrysmith/edges.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "berrysmith/error.hpp"

namespace berrysmith {

std::int64_t EdgeMap::count() const {
  return std::count_if(edges.begin(), edges.end(), [](std::uint8_t v) { return v != 0; });
}

bool DcedParams::valid() const {
  return kernel_size >= 1 && kernel_size % 2 == 1 && wide.th_min >= 0.0 &&
         wide.th_max > wide.th_min && narrow.th_min >= wide.th_min &&
         narrow.th_max > narrow.th_min && narrow.th_max > wide.th_max;
}

void DcedParams::validate() const {
  if (!valid()) {
    throw InvalidArgument("invalid DCED parameters: K=" + std::to_string(kernel_size) +
                          " wide=(" + std::to_string(wide.th_min) + ", " +
                          std::to_string(wide.th_max) + ") narrow=(" +
                          std::to_string(narrow.th_min) + ", " + std::to_string(narrow.th_max) +
                          ")");
  }
}

namespace {

// tan(22.5 deg) and tan(67.5 deg): boundaries of the four direction bins.
constexpr double kTan22 = 0.41421356237309503;
constexpr double kTan67 = 2.4142135623730949;

}  // namespace

SuppressedMagnitude suppress_non_maxima(const ImageGray& img, int kernel_size) {
  const ImageGray blurred = gaussian_blur(img, kernel_size, sigma_for_kernel(kernel_size));
  const GradientField g = sobel_gradients(blurred);
  const int w = g.width;
  const int h = g.height;

  std::vector<double> mag(g.magnitude.size());
  for (std::size_t i = 0; i < mag.size(); ++i) mag[i] = g.magnitude[i] * kMagnitudeScale;

  auto at = [&](int x, int y) {
    if (x < 0 || y < 0 || x >= w || y >= h) return 0.0;
    return mag[static_cast<std::size_t>(y) * w + x];
  };

  SuppressedMagnitude out{w, h, std::vector<double>(mag.size(), 0.0)};
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      const double m = mag[i];
      if (m <= kMagnitudeTolerance) continue;
      const double ax = std::abs(g.gx[i]);
      const double ay = std::abs(g.gy[i]);
      int dx = 0;
      int dy = 0;
      if (ay <= ax * kTan22) {
        dx = 1;
      } else if (ay >= ax * kTan67) {
        dy = 1;
      } else if ((g.gx[i] > 0) == (g.gy[i] > 0)) {
        dx = 1;
        dy = 1;
      } else {
        dx = -1;
        dy = 1;
      }
      // Asymmetric comparison keeps exactly one pixel of a two-pixel plateau.
      const double behind = at(x - dx, y - dy);
      const double ahead = at(x + dx, y + dy);
      if (m > behind + kMagnitudeTolerance && m >= ahead - kMagnitudeTolerance) {
        out.values[i] = m;
      }
    }
  }
  return out;
}

EdgeMap hysteresis(const SuppressedMagnitude& magnitude, CannyThresholds t) {
  if (!t.valid()) throw InvalidArgument("Canny thresholds need 0 <= th_min < th_max");
  const int w = magnitude.width;
  const int h = magnitude.height;
  const auto& v = magnitude.values;
  const double lo = t.th_min + kMagnitudeTolerance;
  const double hi = t.th_max + kMagnitudeTolerance;

  EdgeMap out{w, h, std::vector<std::uint8_t>(v.size(), 0)};
  std::vector<std::size_t> stack;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] > hi && !out.edges[i]) {
      out.edges[i] = 1;
      stack.push_back(i);
    }
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      const int px = static_cast<int>(p % w);
      const int py = static_cast<int>(p / w);
      for (int ny = std::max(py - 1, 0); ny <= std::min(py + 1, h - 1); ++ny) {
        for (int nx = std::max(px - 1, 0); nx <= std::min(px + 1, w - 1); ++nx) {
          const std::size_t q = static_cast<std::size_t>(ny) * w + nx;
          if (!out.edges[q] && v[q] > lo) {
            out.edges[q] = 1;
            stack.push_back(q);
          }
        }
      }
    }
  }
  return out;
}

std::vector<std::int64_t> hysteresis_counts(const SuppressedMagnitude& magnitude, double th_min,
                                            std::span<const double> th_maxes) {
  const int w = magnitude.width;
  const int h = magnitude.height;
  const auto& v = magnitude.values;
  const double lo = th_min + kMagnitudeTolerance;

  // Each 8-connected component of weak pixels is entirely in or out of the
  // hysteresis output: in iff its peak clears th_max.
  std::vector<std::int32_t> label(v.size(), -1);
  std::vector<std::int64_t> sizes;
  std::vector<double> peaks;
  std::vector<std::size_t> stack;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (label[i] >= 0 || !(v[i] > lo)) continue;
    const auto id = static_cast<std::int32_t>(sizes.size());
    std::int64_t size = 0;
    double peak = 0.0;
    label[i] = id;
    stack.push_back(i);
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      ++size;
      peak = std::max(peak, v[p]);
      const int px = static_cast<int>(p % w);
      const int py = static_cast<int>(p / w);
      for (int ny = std::max(py - 1, 0); ny <= std::min(py + 1, h - 1); ++ny) {
        for (int nx = std::max(px - 1, 0); nx <= std::min(px + 1, w - 1); ++nx) {
          const std::size_t q = static_cast<std::size_t>(ny) * w + nx;
          if (label[q] < 0 && v[q] > lo) {
            label[q] = id;
            stack.push_back(q);
          }
        }
      }
    }
    sizes.push_back(size);
    peaks.push_back(peak);
  }

  std::vector<std::int64_t> counts(th_maxes.size(), 0);
  for (std::size_t k = 0; k < th_maxes.size(); ++k) {
    if (!(th_maxes[k] > th_min)) throw InvalidArgument("Canny thresholds need th_min < th_max");
    const double hi = th_maxes[k] + kMagnitudeTolerance;
    for (std::size_t c = 0; c < sizes.size(); ++c) {
      if (peaks[c] > hi) counts[k] += sizes[c];
    }
  }
  return counts;
}

EdgeMap canny(const ImageGray& img, CannyThresholds t, int kernel_size) {
  if (!t.valid()) throw InvalidArgument("Canny thresholds need 0 <= th_min < th_max");
  return hysteresis(suppress_non_maxima(img, kernel_size), t);
}

DcedResult dced(const SuppressedMagnitude& magnitude, const DcedParams& p) {
  p.validate();
  DcedResult r;
  r.wide = hysteresis(magnitude, p.wide);
  r.narrow = hysteresis(magnitude, p.narrow);
  r.diff = EdgeMap{magnitude.width, magnitude.height,
                   std::vector<std::uint8_t>(r.wide.edges.size(), 0)};
  for (std::size_t i = 0; i < r.diff.edges.size(); ++i) {
    r.diff.edges[i] = r.wide.edges[i] && !r.narrow.edges[i];
  }
  r.wide_count = r.wide.count();
  r.narrow_count = r.narrow.count();
  r.diff_count = r.diff.count();
  return r;
}

DcedResult dced(const ImageGray& img, const DcedParams& p) {
  p.validate();
  return dced(suppress_non_maxima(img, p.kernel_size), p);
}

int edge_guard_radius(int kernel_size) { return (kernel_size - 1) / 2 + 1; }

MaskedEdgeStats masked_edge_stats(const ImageGray& img, const SegMask& mask, const DcedParams& p,
                                  bool erode_guard) {
  p.validate();
  if (mask.width() != img.width() || mask.height() != img.height()) {
    throw InvalidArgument("mask raster does not match the image");
  }
  const int pad = (p.kernel_size - 1) / 2 + 1;
  const BoundingBox box = mask.bounding_box();
  BoundingBox crop{std::max(box.x0 - pad, 0), std::max(box.y0 - pad, 0),
                   std::min(box.x1 + pad, img.width()), std::min(box.y1 + pad, img.height())};
  // Grow tiny crops to the 3x3 minimum the gradient stencil needs.
  while (crop.width() < 3 && (crop.x0 > 0 || crop.x1 < img.width())) {
    if (crop.x0 > 0) --crop.x0;
    if (crop.width() < 3 && crop.x1 < img.width()) ++crop.x1;
  }
  while (crop.height() < 3 && (crop.y0 > 0 || crop.y1 < img.height())) {
    if (crop.y0 > 0) --crop.y0;
    if (crop.height() < 3 && crop.y1 < img.height()) ++crop.y1;
  }
  const int cw = crop.width();
  const int ch = crop.height();

  std::vector<std::uint8_t> inside(static_cast<std::size_t>(cw) * ch, 0);
  mask.for_each_pixel([&](int x, int y) {
    inside[static_cast<std::size_t>(y - crop.y0) * cw + (x - crop.x0)] = 1;
  });
  ImageGray berry(cw, ch);
  for (int y = 0; y < ch; ++y) {
    for (int x = 0; x < cw; ++x) {
      if (inside[static_cast<std::size_t>(y) * cw + x]) {
        berry.at(x, y) = img.at(x + crop.x0, y + crop.y0);
      }
    }
  }

  // The crop border is background unless it coincides with the image border,
  // where the mask itself may end; erode_bitmap treats outside as background,
  // matching global erosion either way.
  const auto region =
      erode_guard ? erode_bitmap(cw, ch, inside, edge_guard_radius(p.kernel_size)) : inside;

  const SuppressedMagnitude mag = suppress_non_maxima(berry, p.kernel_size);
  const EdgeMap wide = hysteresis(mag, p.wide);
  const EdgeMap narrow = hysteresis(mag, p.narrow);

  MaskedEdgeStats stats;
  stats.mask_count = mask.area();
  std::int64_t region_count = 0;
  for (std::size_t i = 0; i < region.size(); ++i) {
    if (!region[i]) continue;
    ++region_count;
    if (wide.edges[i] && !narrow.edges[i]) ++stats.diff_count;
  }
  if (region_count == 0) {
    stats.eroded_empty = true;
    stats.edge_ratio = 0.0;
    return stats;
  }
  stats.edge_ratio = static_cast<double>(stats.diff_count) / static_cast<double>(stats.mask_count);
  return stats;
}

}  // namespace berrysmith
