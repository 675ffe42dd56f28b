#include "berrysmith/seg_mask.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_set>

#include "berrysmith/error.hpp"

namespace berrysmith {

SegMask::SegMask(int width, int height, std::vector<Run> runs, std::string mask_id,
                 std::string source_image)
    : width_(width),
      height_(height),
      mask_id_(std::move(mask_id)),
      source_image_(std::move(source_image)) {
  if (width < 1 || height < 1) throw InvalidArgument("mask raster must be non-empty");
  const std::int64_t total = static_cast<std::int64_t>(width) * height;
  std::int64_t prev_end = -1;
  for (const Run& r : runs) {
    if (r.length < 1 || r.start < 0 || r.start + r.length > total) {
      throw InvalidArgument("mask run out of raster range");
    }
    if (r.start < prev_end) throw InvalidArgument("mask runs unsorted or overlapping");
    if (!runs_.empty() && r.start == prev_end) {
      runs_.back().length += r.length;
    } else {
      runs_.push_back(r);
    }
    prev_end = r.start + r.length;
    area_ += r.length;
  }
  if (area_ == 0) throw InvalidArgument("mask must cover at least one pixel");
}

std::optional<SegMask> SegMask::from_bitmap(int width, int height,
                                            std::span<const std::uint8_t> bits,
                                            std::string mask_id, std::string source_image) {
  if (bits.size() != static_cast<std::size_t>(width) * height) {
    throw InvalidArgument("bitmap length does not match raster");
  }
  std::vector<Run> runs;
  const auto n = static_cast<std::int64_t>(bits.size());
  std::int64_t i = 0;
  while (i < n) {
    if (!bits[i]) {
      ++i;
      continue;
    }
    const std::int64_t start = i;
    while (i < n && bits[i]) ++i;
    runs.push_back({start, i - start});
  }
  if (runs.empty()) return std::nullopt;
  return SegMask(width, height, std::move(runs), std::move(mask_id), std::move(source_image));
}

BoundingBox SegMask::bounding_box() const {
  BoundingBox box{width_, height_, 0, 0};
  for (const Run& r : runs_) {
    const std::int64_t last = r.start + r.length - 1;
    const int ya = static_cast<int>(r.start / width_);
    const int yb = static_cast<int>(last / width_);
    box.y0 = std::min(box.y0, ya);
    box.y1 = std::max(box.y1, yb + 1);
    if (ya != yb) {
      box.x0 = 0;
      box.x1 = width_;
    } else {
      box.x0 = std::min(box.x0, static_cast<int>(r.start % width_));
      box.x1 = std::max(box.x1, static_cast<int>(last % width_) + 1);
    }
  }
  return box;
}

bool SegMask::contains(int x, int y) const {
  if (x < 0 || y < 0 || x >= width_ || y >= height_) return false;
  const std::int64_t off = static_cast<std::int64_t>(y) * width_ + x;
  auto it = std::upper_bound(runs_.begin(), runs_.end(), off,
                             [](std::int64_t v, const Run& r) { return v < r.start; });
  if (it == runs_.begin()) return false;
  --it;
  return off < it->start + it->length;
}

std::vector<std::uint8_t> SegMask::to_bitmap() const {
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(width_) * height_, 0);
  for (const Run& r : runs_) {
    std::fill_n(bits.begin() + r.start, r.length, std::uint8_t{1});
  }
  return bits;
}

SegMask SegMask::renamed(std::string mask_id) const {
  SegMask copy = *this;
  copy.mask_id_ = std::move(mask_id);
  return copy;
}

bool SegMask::touches_border() const {
  const BoundingBox b = bounding_box();
  if (b.y0 == 0 || b.y1 == height_ || b.x0 == 0 || b.x1 == width_) {
    // The box is conservative for wrapping runs; confirm with actual pixels.
    bool touches = false;
    for_each_pixel([&](int x, int y) {
      if (x == 0 || y == 0 || x == width_ - 1 || y == height_ - 1) touches = true;
    });
    return touches;
  }
  return false;
}

const char* to_string(MaskGenerator g) {
  switch (g) {
    case MaskGenerator::ExternalModel:
      return "external_model";
    case MaskGenerator::Fallback:
      return "fallback";
    case MaskGenerator::Fixture:
      return "fixture";
  }
  return "fixture";
}

std::optional<MaskGenerator> parse_mask_generator(std::string_view s) {
  if (s == "external_model") return MaskGenerator::ExternalModel;
  if (s == "fallback") return MaskGenerator::Fallback;
  if (s == "fixture") return MaskGenerator::Fixture;
  return std::nullopt;
}

void MaskSet::validate() const {
  if (width < 1 || height < 1) throw InvalidArgument("mask set raster must be non-empty");
  std::unordered_set<std::string> ids;
  for (const SegMask& m : masks) {
    if (m.width() != width || m.height() != height) {
      throw InvalidArgument("mask '" + m.mask_id() + "' does not match the set's raster");
    }
    if (m.source_image() != source_image) {
      throw InvalidArgument("mask '" + m.mask_id() + "' belongs to another source image");
    }
    if (!ids.insert(m.mask_id()).second) {
      throw InvalidArgument("duplicate mask id '" + m.mask_id() + "'");
    }
  }
}

MaskSet filter_masks(const MaskSet& set) {
  MaskSet out{set.source_image, set.width, set.height, set.generator, {}, set.metadata};
  const std::size_t n = set.masks.size();
  if (n == 0) return out;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return set.masks[a].area() > set.masks[b].area();
  });
  const std::size_t keep = (n + 1) / 2;

  std::int64_t total = 0;
  for (const SegMask& m : set.masks) total += m.area();

  // area > total / n, compared exactly.
  std::vector<bool> selected(n, false);
  for (std::size_t i = 0; i < keep; ++i) {
    const SegMask& m = set.masks[order[i]];
    if (m.area() * static_cast<std::int64_t>(n) > total) selected[order[i]] = true;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (selected[i]) out.masks.push_back(set.masks[i]);
  }
  return out;
}

std::optional<SegMask> intersect(const SegMask& a, const SegMask& b) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw InvalidArgument("cannot intersect masks of different raster sizes");
  }
  std::vector<Run> runs;
  const auto& ra = a.runs();
  const auto& rb = b.runs();
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < ra.size() && j < rb.size()) {
    const std::int64_t lo = std::max(ra[i].start, rb[j].start);
    const std::int64_t a_end = ra[i].start + ra[i].length;
    const std::int64_t b_end = rb[j].start + rb[j].length;
    const std::int64_t hi = std::min(a_end, b_end);
    if (lo < hi) runs.push_back({lo, hi - lo});
    if (a_end < b_end) {
      ++i;
    } else {
      ++j;
    }
  }
  if (runs.empty()) return std::nullopt;
  return SegMask(a.width(), a.height(), std::move(runs), a.mask_id() + "&" + b.mask_id(),
                 a.source_image());
}

std::vector<std::uint8_t> erode_bitmap(int width, int height, std::span<const std::uint8_t> bits,
                                       int radius) {
  if (radius < 0) throw InvalidArgument("erosion radius must be non-negative");
  std::vector<std::uint8_t> out(bits.begin(), bits.end());
  if (radius == 0) return out;

  // Separable: a pixel survives a 1-D pass when the whole window is set. A
  // running count of consecutive set pixels makes each pass linear.
  std::vector<std::uint8_t> tmp(out.size(), 0);
  for (int y = 0; y < height; ++y) {
    const std::uint8_t* row = out.data() + static_cast<std::size_t>(y) * width;
    std::uint8_t* dst = tmp.data() + static_cast<std::size_t>(y) * width;
    std::vector<int> run_left(width), run_right(width);
    for (int x = 0, c = 0; x < width; ++x) run_left[x] = c = row[x] ? c + 1 : 0;
    for (int x = width - 1, c = 0; x >= 0; --x) run_right[x] = c = row[x] ? c + 1 : 0;
    for (int x = 0; x < width; ++x) {
      dst[x] = row[x] && run_left[x] > radius && run_right[x] > radius;
    }
  }
  std::fill(out.begin(), out.end(), 0);
  std::vector<int> up(height), down(height);
  for (int x = 0; x < width; ++x) {
    auto at = [&](int y) { return tmp[static_cast<std::size_t>(y) * width + x]; };
    for (int y = 0, c = 0; y < height; ++y) up[y] = c = at(y) ? c + 1 : 0;
    for (int y = height - 1, c = 0; y >= 0; --y) down[y] = c = at(y) ? c + 1 : 0;
    for (int y = 0; y < height; ++y) {
      out[static_cast<std::size_t>(y) * width + x] = at(y) && up[y] > radius && down[y] > radius;
    }
  }
  return out;
}

std::optional<SegMask> erode(const SegMask& mask, int radius) {
  if (radius < 0) throw InvalidArgument("erosion radius must be non-negative");
  if (radius == 0) return mask;
  // Work on the bounding box only; everything outside it is background anyway.
  const BoundingBox box = mask.bounding_box();
  const int bw = box.width();
  const int bh = box.height();
  std::vector<std::uint8_t> local(static_cast<std::size_t>(bw) * bh, 0);
  mask.for_each_pixel([&](int x, int y) {
    local[static_cast<std::size_t>(y - box.y0) * bw + (x - box.x0)] = 1;
  });
  const auto eroded = erode_bitmap(bw, bh, local, radius);
  std::vector<Run> runs;
  for (int y = 0; y < bh; ++y) {
    int x = 0;
    while (x < bw) {
      if (!eroded[static_cast<std::size_t>(y) * bw + x]) {
        ++x;
        continue;
      }
      const int start = x;
      while (x < bw && eroded[static_cast<std::size_t>(y) * bw + x]) ++x;
      runs.push_back({static_cast<std::int64_t>(y + box.y0) * mask.width() + box.x0 + start,
                      x - start});
    }
  }
  if (runs.empty()) return std::nullopt;
  return SegMask(mask.width(), mask.height(), std::move(runs), mask.mask_id(),
                 mask.source_image());
}

}  // namespace berrysmith
