#pragma once

#include "berrysmith/seg_mask.hpp"

namespace berrysmith {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

/// Dominant orientation of a mask from the covariance of its pixel coordinates.
struct PrincipalAxis {
  Point2 centroid;
  /// Unit eigenvector of the larger eigenvalue, canonicalized to x > 0 (or
  /// x == 0 and y > 0). (1, 0) when degenerate.
  Point2 axis{1.0, 0.0};
  /// Larger over smaller eigenvalue; +inf for a straight line of pixels.
  double elongation = 1.0;
  /// Eigenvalue ratio below 1 + 1e-6, i.e. no preferred direction.
  bool degenerate = false;
};

inline constexpr double kDegenerateEigenRatio = 1.0 + 1e-6;

/// Pixel coordinates are the integer (column, row) of each foreground pixel.
/// Throws InvalidArgument for masks with fewer than 3 pixels.
PrincipalAxis principal_axis(const SegMask& mask);

}  // namespace berrysmith
