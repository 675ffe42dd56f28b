#include "berrysmith/segment.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <vector>

namespace berrysmith {

int otsu_threshold(const ImageGray& img) {
  std::array<std::int64_t, 256> hist{};
  for (double v : img.pixels()) ++hist[static_cast<int>(std::lround(v))];

  const auto total = static_cast<double>(img.pixel_count());
  double sum_all = 0.0;
  for (int i = 0; i < 256; ++i) sum_all += i * static_cast<double>(hist[i]);

  int lowest = 0;
  while (hist[lowest] == 0) ++lowest;

  double weight_bg = 0.0;
  double sum_bg = 0.0;
  double best_var = -1.0;
  int best = lowest;
  for (int t = 0; t < 256; ++t) {
    weight_bg += hist[t];
    sum_bg += t * static_cast<double>(hist[t]);
    const double weight_fg = total - weight_bg;
    if (weight_bg == 0.0 || weight_fg == 0.0) continue;
    const double mean_bg = sum_bg / weight_bg;
    const double mean_fg = (sum_all - sum_bg) / weight_fg;
    const double between = weight_bg * weight_fg * (mean_bg - mean_fg) * (mean_bg - mean_fg);
    if (between > best_var) {
      best_var = between;
      best = t;
    }
  }
  return best;
}

MaskSet segment_fallback(const ImageRgb& img, std::int64_t min_area, std::string source_image) {
  const ImageGray gray = to_grayscale(img);
  const int threshold = otsu_threshold(gray);
  const int w = img.width();
  const int h = img.height();
  const std::size_t n = img.pixel_count();

  std::vector<std::uint8_t> fg(n);
  for (std::size_t i = 0; i < n; ++i) fg[i] = std::lround(gray.pixels()[i]) > threshold;

  MaskSet set{source_image, w, h, MaskGenerator::Fallback, {}, {}};
  std::vector<std::int32_t> label(n, -1);
  std::vector<std::size_t> stack;
  std::vector<std::uint8_t> component(n, 0);
  std::int32_t next_label = 0;
  int emitted = 0;
  for (std::size_t seed = 0; seed < n; ++seed) {
    if (!fg[seed] || label[seed] >= 0) continue;
    std::vector<std::size_t> members;
    label[seed] = next_label;
    stack.push_back(seed);
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      members.push_back(p);
      const int px = static_cast<int>(p % w);
      const int py = static_cast<int>(p / w);
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int qx = px + dx;
          const int qy = py + dy;
          if (qx < 0 || qy < 0 || qx >= w || qy >= h) continue;
          const std::size_t q = static_cast<std::size_t>(qy) * w + qx;
          if (fg[q] && label[q] < 0) {
            label[q] = next_label;
            stack.push_back(q);
          }
        }
      }
    }
    ++next_label;
    if (static_cast<std::int64_t>(members.size()) < min_area) continue;
    for (std::size_t p : members) component[p] = 1;
    char id[16];
    std::snprintf(id, sizeof id, "c%04d", emitted++);
    set.masks.push_back(*SegMask::from_bitmap(w, h, component, id, source_image));
    for (std::size_t p : members) component[p] = 0;
  }
  return set;
}

}  // namespace berrysmith
