#include "berrysmith/principal_axis.hpp"

#include <cmath>
#include <limits>

#include "berrysmith/error.hpp"

namespace berrysmith {

PrincipalAxis principal_axis(const SegMask& mask) {
  if (mask.area() < 3) {
    throw InvalidArgument("principal axis needs at least 3 foreground pixels");
  }
  // Raw integer moments keep the covariance exact, so translated or
  // point-reflected masks yield bit-identical axes.
  std::int64_t n = 0, sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  mask.for_each_pixel([&](int x, int y) {
    ++n;
    sx += x;
    sy += y;
    sxx += static_cast<std::int64_t>(x) * x;
    syy += static_cast<std::int64_t>(y) * y;
    sxy += static_cast<std::int64_t>(x) * y;
  });

  PrincipalAxis out;
  out.centroid = {static_cast<double>(sx) / n, static_cast<double>(sy) / n};

  // n^2 * covariance, exact in 64-bit for rasters up to a few thousand pixels a side.
  const double nn = static_cast<double>(n) * static_cast<double>(n);
  const double a = static_cast<double>(n * sxx - sx * sx) / nn;
  const double c = static_cast<double>(n * syy - sy * sy) / nn;
  const double b = static_cast<double>(n * sxy - sx * sy) / nn;

  const double mean = 0.5 * (a + c);
  const double spread = std::hypot(0.5 * (a - c), b);
  const double lambda1 = mean + spread;
  const double lambda2 = mean - spread;

  if (lambda2 <= 0.0) {
    out.elongation = std::numeric_limits<double>::infinity();
  } else {
    out.elongation = lambda1 / lambda2;
  }
  out.degenerate = lambda2 > 0.0 && out.elongation < kDegenerateEigenRatio;
  if (out.degenerate) {
    out.axis = {1.0, 0.0};
    return out;
  }

  // Two algebraically equivalent eigenvector forms; take the better conditioned.
  double vx = lambda1 - c, vy = b;
  const double ux = b, uy = lambda1 - a;
  if (std::hypot(ux, uy) > std::hypot(vx, vy)) {
    vx = ux;
    vy = uy;
  }
  const double len = std::hypot(vx, vy);
  vx /= len;
  vy /= len;
  if (vx < 0.0 || (vx == 0.0 && vy < 0.0)) {
    vx = -vx;
    vy = -vy;
  }
  out.axis = {vx + 0.0, vy + 0.0};
  return out;
}

}  // namespace berrysmith
