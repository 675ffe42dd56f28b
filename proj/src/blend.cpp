#include "berrysmith/blend.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace berrysmith {

const char* to_string(GammaMode m) { return m == GammaMode::Literal ? "literal" : "sqrt_area"; }

std::optional<GammaMode> parse_gamma_mode(std::string_view s) {
  if (s == "sqrt_area") return GammaMode::SqrtArea;
  if (s == "literal") return GammaMode::Literal;
  return std::nullopt;
}

Point2 AlignmentTransform::forward(Point2 p) const {
  const double c = std::cos(signed_rotation);
  const double s = std::sin(signed_rotation);
  const double dx = p.x - source_centroid.x;
  const double dy = p.y - source_centroid.y;
  return {destination_centroid.x + linear_scale * (c * dx - s * dy),
          destination_centroid.y + linear_scale * (s * dx + c * dy)};
}

Point2 AlignmentTransform::inverse(Point2 q) const {
  const double c = std::cos(signed_rotation);
  const double s = std::sin(signed_rotation);
  const double dx = (q.x - destination_centroid.x) / linear_scale;
  const double dy = (q.y - destination_centroid.y) / linear_scale;
  return {source_centroid.x + (c * dx + s * dy), source_centroid.y + (-s * dx + c * dy)};
}

AlignmentTransform compute_alignment(const SegMask& src, const SegMask& dst, GammaMode mode) {
  if (src.area() < 3 || dst.area() < 3) {
    throw InvalidArgument("alignment needs masks of at least 3 pixels");
  }
  const PrincipalAxis zs = principal_axis(src);
  const PrincipalAxis zd = principal_axis(dst);

  AlignmentTransform t;
  t.gamma_mode = mode;
  t.gamma = static_cast<double>(dst.area()) / static_cast<double>(src.area());
  t.linear_scale = mode == GammaMode::SqrtArea ? std::sqrt(t.gamma) : t.gamma;
  t.source_centroid = zs.centroid;
  t.destination_centroid = zd.centroid;
  t.translation = {zd.centroid.x - zs.centroid.x, zd.centroid.y - zs.centroid.y};

  if (zs.degenerate || zd.degenerate) return t;

  const double dot = zs.axis.x * zd.axis.x + zs.axis.y * zd.axis.y;
  const double cross = zs.axis.x * zd.axis.y - zs.axis.y * zd.axis.x;
  t.phi = std::acos(std::clamp(dot, -1.0, 1.0));
  double theta = std::atan2(cross, dot);
  constexpr double kPi = std::numbers::pi;
  if (theta > kPi / 2) theta -= kPi;
  if (theta < -kPi / 2) theta += kPi;
  t.signed_rotation = theta;
  return t;
}

WarpResult warp(const ImageRgb& src_img, const SegMask& src_mask, const AlignmentTransform& t,
                int canvas_width, int canvas_height) {
  if (src_mask.width() != src_img.width() || src_mask.height() != src_img.height()) {
    throw InvalidArgument("source mask does not match the source image");
  }
  if (!(t.linear_scale > 0.0)) throw InvalidArgument("warp needs a positive scale");
  WarpResult out{ImageRgb(canvas_width, canvas_height), std::nullopt};

  // Canvas box covering the warped source box, with room for the stencil.
  const BoundingBox sb = src_mask.bounding_box();
  double lo_x = 1e300, lo_y = 1e300, hi_x = -1e300, hi_y = -1e300;
  for (const Point2 corner : {Point2{sb.x0 - 1.0, sb.y0 - 1.0}, Point2{sb.x1 + 0.0, sb.y0 - 1.0},
                              Point2{sb.x0 - 1.0, sb.y1 + 0.0}, Point2{sb.x1 + 0.0, sb.y1 + 0.0}}) {
    const Point2 q = t.forward(corner);
    lo_x = std::min(lo_x, q.x);
    lo_y = std::min(lo_y, q.y);
    hi_x = std::max(hi_x, q.x);
    hi_y = std::max(hi_y, q.y);
  }
  constexpr int kMargin = 2;
  const int x0 = std::max(0, static_cast<int>(std::floor(lo_x)) - kMargin);
  const int y0 = std::max(0, static_cast<int>(std::floor(lo_y)) - kMargin);
  const int x1 = std::min(canvas_width, static_cast<int>(std::ceil(hi_x)) + kMargin + 1);
  const int y1 = std::min(canvas_height, static_cast<int>(std::ceil(hi_y)) + kMargin + 1);
  if (x0 >= x1 || y0 >= y1) return out;

  const int sw = src_img.width();
  const int sh = src_img.height();
  const std::vector<std::uint8_t> src_bits = [&] {
    // Local bitmap over the source box for fast coverage lookups.
    std::vector<std::uint8_t> bits(static_cast<std::size_t>(sb.width()) * sb.height(), 0);
    src_mask.for_each_pixel([&](int x, int y) {
      bits[static_cast<std::size_t>(y - sb.y0) * sb.width() + (x - sb.x0)] = 1;
    });
    return bits;
  }();
  auto mask_at = [&](int x, int y) -> double {
    if (x < sb.x0 || y < sb.y0 || x >= sb.x1 || y >= sb.y1) return 0.0;
    return src_bits[static_cast<std::size_t>(y - sb.y0) * sb.width() + (x - sb.x0)];
  };

  std::vector<std::uint8_t> warped_bits(static_cast<std::size_t>(canvas_width) * canvas_height, 0);
  bool any = false;
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) {
      const Point2 p = t.inverse({static_cast<double>(x), static_cast<double>(y)});
      if (p.x < -0.5 || p.y < -0.5 || p.x > sw - 0.5 || p.y > sh - 0.5) continue;
      const int ix = static_cast<int>(std::floor(p.x));
      const int iy = static_cast<int>(std::floor(p.y));
      const double fx = p.x - ix;
      const double fy = p.y - iy;
      const double w00 = (1 - fx) * (1 - fy), w10 = fx * (1 - fy);
      const double w01 = (1 - fx) * fy, w11 = fx * fy;

      const int cx0 = std::clamp(ix, 0, sw - 1), cx1 = std::clamp(ix + 1, 0, sw - 1);
      const int cy0 = std::clamp(iy, 0, sh - 1), cy1 = std::clamp(iy + 1, 0, sh - 1);
      for (int c = 0; c < 3; ++c) {
        const double v = w00 * src_img.at(cx0, cy0, c) + w10 * src_img.at(cx1, cy0, c) +
                         w01 * src_img.at(cx0, cy1, c) + w11 * src_img.at(cx1, cy1, c);
        out.image.at(x, y, c) = static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
      }
      const double coverage = w00 * mask_at(ix, iy) + w10 * mask_at(ix + 1, iy) +
                              w01 * mask_at(ix, iy + 1) + w11 * mask_at(ix + 1, iy + 1);
      if (coverage >= 0.5) {
        warped_bits[static_cast<std::size_t>(y) * canvas_width + x] = 1;
        any = true;
      }
    }
  }
  if (any) {
    out.mask = SegMask::from_bitmap(canvas_width, canvas_height, warped_bits,
                                    src_mask.mask_id(), src_mask.source_image());
  }
  return out;
}

PasteDecision paste_region(const SegMask& warped_mask, const SegMask& dst_mask,
                           double min_overlap) {
  PasteDecision d;
  auto region = intersect(warped_mask, dst_mask);
  if (!region) {
    d.disjoint = true;
    return d;
  }
  d.overlap_ratio = static_cast<double>(region->area()) / static_cast<double>(dst_mask.area());
  if (d.overlap_ratio < min_overlap) return d;
  d.paste = PasteRegion{region->renamed(dst_mask.mask_id()), d.overlap_ratio};
  return d;
}

PoissonNonConvergence::PoissonNonConvergence(double residual, int sweeps)
    : Error("Poisson solver did not converge: relative residual " + std::to_string(residual) +
            " after " + std::to_string(sweeps) + " sweeps"),
      residual_(residual),
      sweeps_(sweeps) {}

namespace {

constexpr int kSweepsPerCheck = 4;

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

}  // namespace

PoissonSolution solve_poisson(const ImageRgb& dst, const ImageRgb& src, const SegMask& region,
                              const PoissonOptions& options) {
  const int w = dst.width();
  const int h = dst.height();
  if (src.width() != w || src.height() != h) {
    throw InvalidArgument("Poisson blend needs source and destination of equal size");
  }
  if (region.width() != w || region.height() != h) {
    throw InvalidArgument("blend region does not match the image raster");
  }
  if (region.touches_border()) {
    throw InvalidArgument("blend region must not touch the image border");
  }

  PoissonSolution sol;
  const BoundingBox box = region.bounding_box();
  const int bw = box.width();
  std::vector<std::int32_t> local(static_cast<std::size_t>(bw) * box.height(), -1);
  region.for_each_pixel([&](int x, int y) {
    local[static_cast<std::size_t>(y - box.y0) * bw + (x - box.x0)] =
        static_cast<std::int32_t>(sol.offsets.size());
    sol.offsets.push_back(static_cast<std::int64_t>(y) * w + x);
  });
  const std::size_t n = sol.offsets.size();
  auto unknown_at = [&](int x, int y) -> std::int32_t {
    if (x < box.x0 || y < box.y0 || x >= box.x1 || y >= box.y1) return -1;
    return local[static_cast<std::size_t>(y - box.y0) * bw + (x - box.x0)];
  };

  // Interior neighbours per unknown (-1 where the neighbour is boundary), and
  // the right-hand side b = guidance + Dirichlet boundary values.
  std::vector<std::array<std::int32_t, 4>> nbr(n);
  std::array<std::vector<double>, 3> rhs;
  std::array<std::int64_t, 3> boundary_offset_sum{};
  std::int64_t boundary_terms = 0;
  for (int c = 0; c < 3; ++c) {
    rhs[c].assign(n, 0.0);
    sol.guidance[c].assign(n, 0.0);
  }
  constexpr int kDx[4] = {-1, 1, 0, 0};
  constexpr int kDy[4] = {0, 0, -1, 1};
  for (std::size_t i = 0; i < n; ++i) {
    const int x = static_cast<int>(sol.offsets[i] % w);
    const int y = static_cast<int>(sol.offsets[i] / w);
    for (int k = 0; k < 4; ++k) {
      const int qx = x + kDx[k];
      const int qy = y + kDy[k];
      const std::int32_t j = unknown_at(qx, qy);
      nbr[i][k] = j;
      if (j < 0) ++boundary_terms;
      for (int c = 0; c < 3; ++c) {
        const int gp = src.at(x, y, c);
        const int gq = src.at(qx, qy, c);
        sol.guidance[c][i] += gp - gq;
        if (j < 0) {
          rhs[c][i] += dst.at(qx, qy, c);
          boundary_offset_sum[c] += dst.at(qx, qy, c) - gq;
        }
      }
    }
    for (int c = 0; c < 3; ++c) rhs[c][i] += sol.guidance[c][i];
  }

  // Start from the source shifted by the mean boundary mismatch, rounded to an
  // integer so that adding a constant to the source shifts nothing else.
  for (int c = 0; c < 3; ++c) {
    const std::int64_t shift =
        boundary_terms == 0
            ? 0
            : floor_div(2 * boundary_offset_sum[c] + boundary_terms, 2 * boundary_terms);
    sol.values[c].resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const int x = static_cast<int>(sol.offsets[i] % w);
      const int y = static_cast<int>(sol.offsets[i] / w);
      sol.values[c][i] = static_cast<double>(src.at(x, y, c) + shift);
    }
  }

  // The sweeps run on the bounding box padded by one pixel. Cells outside the
  // region hold the destination, so every neighbour is a fixed stride away.
  const int gw = bw + 2;
  const int gh = box.height() + 2;
  std::vector<std::int64_t> cell(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int x = static_cast<int>(sol.offsets[i] % w);
    const int y = static_cast<int>(sol.offsets[i] / w);
    cell[i] = static_cast<std::int64_t>(y - box.y0 + 1) * gw + (x - box.x0 + 1);
  }

  // Channels are interleaved so their independent update chains overlap.
  std::vector<double> grid(static_cast<std::size_t>(gw) * gh * 3);
  for (int gy = 0; gy < gh; ++gy) {
    for (int gx = 0; gx < gw; ++gx) {
      for (int c = 0; c < 3; ++c) {
        grid[(static_cast<std::size_t>(gy) * gw + gx) * 3 + c] =
            dst.at(box.x0 - 1 + gx, box.y0 - 1 + gy, c);
      }
    }
  }
  std::vector<double> guide(n * 3);
  std::array<double, 3> norm{};
  for (int c = 0; c < 3; ++c) {
    double b2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      grid[cell[i] * 3 + c] = sol.values[c][i];
      guide[i * 3 + c] = sol.guidance[c][i];
      b2 += rhs[c][i] * rhs[c][i];
    }
    norm[c] = std::max(std::sqrt(b2), 1.0);
  }

  double* f = grid.data();
  const double* g = guide.data();
  const std::int64_t up = static_cast<std::int64_t>(gw) * 3;
  auto residuals = [&] {
    std::array<double, 3> s2{};
    for (std::size_t i = 0; i < n; ++i) {
      const std::int64_t p = cell[i] * 3;
      for (int c = 0; c < 3; ++c) {
        const double* q = f + p + c;
        const double d = g[i * 3 + c] - (4.0 * q[0] - q[-3] - q[3] - q[-up] - q[up]);
        s2[c] += d * d;
      }
    }
    std::array<double, 3> r{};
    for (int c = 0; c < 3; ++c) r[c] = std::sqrt(s2[c]) / norm[c];
    return r;
  };
  auto worst = [](const std::array<double, 3>& r) { return std::max({r[0], r[1], r[2]}); };

  const double target = std::min(options.target, options.tolerance);
  const double omega = options.omega;
  sol.relative_residual = residuals();
  while (worst(sol.relative_residual) > target) {
    if (sol.sweeps >= options.max_sweeps) {
      if (worst(sol.relative_residual) <= options.tolerance) break;
      throw PoissonNonConvergence(worst(sol.relative_residual), sol.sweeps);
    }
    // The residual costs about as much as a sweep, so it is only
    // re-evaluated every few sweeps.
    const int batch = std::min(kSweepsPerCheck, options.max_sweeps - sol.sweeps);
    for (int s = 0; s < batch; ++s) {
      for (std::size_t i = 0; i < n; ++i) {
        double* q = f + cell[i] * 3;
        const double* gi = g + i * 3;
        for (int c = 0; c < 3; ++c) {
          const double sum = gi[c] + q[c - 3] + q[c + 3] + q[c - up] + q[c + up];
          q[c] += omega * (0.25 * sum - q[c]);
        }
      }
    }
    sol.sweeps += batch;
    sol.relative_residual = residuals();
  }
  for (int c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < n; ++i) sol.values[c][i] = f[cell[i] * 3 + c];
  }
  return sol;
}

BlendResult poisson_blend(const ImageRgb& dst, const ImageRgb& src, const SegMask& region,
                          const PoissonOptions& options) {
  BlendResult out{dst, {}, 0, solve_poisson(dst, src, region, options)};
  const PoissonSolution& sol = out.solution;
  out.relative_residual = sol.relative_residual;
  out.sweeps = sol.sweeps;
  auto pixels = out.image.pixels();
  for (std::size_t i = 0; i < sol.offsets.size(); ++i) {
    for (int c = 0; c < 3; ++c) {
      const double v = std::clamp(sol.values[c][i], 0.0, 255.0);
      pixels[static_cast<std::size_t>(sol.offsets[i]) * 3 + c] =
          static_cast<std::uint8_t>(std::lround(v));
    }
  }
  return out;
}

}  // namespace berrysmith
