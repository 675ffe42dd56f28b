#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "berrysmith/error.hpp"
#include "berrysmith/image.hpp"
#include "berrysmith/principal_axis.hpp"
#include "berrysmith/seg_mask.hpp"

namespace berrysmith {

/// How the area ratio gamma turns into a linear scale factor.
enum class GammaMode {
  SqrtArea,  ///< linear scale sqrt(gamma): warped area matches the destination
  Literal,   ///< linear scale gamma
};

const char* to_string(GammaMode m);
std::optional<GammaMode> parse_gamma_mode(std::string_view s);

/// Similarity transform taking a source segment onto a destination segment:
/// rotate by signed_rotation and scale by linear_scale about the source
/// centroid, then move the source centroid onto the destination centroid.
struct AlignmentTransform {
  double gamma = 1.0;          ///< area(dst) / area(src)
  double linear_scale = 1.0;
  double phi = 0.0;            ///< arccos of the dot product of the unit axes, [0, pi]
  double signed_rotation = 0.0;  ///< [-pi/2, pi/2], radians, y axis down
  Point2 translation;          ///< destination centroid minus source centroid
  Point2 source_centroid;
  Point2 destination_centroid;
  GammaMode gamma_mode = GammaMode::SqrtArea;

  /// Maps a source-image point to the destination canvas.
  Point2 forward(Point2 p) const;
  /// Maps a destination-canvas point back to the source image.
  Point2 inverse(Point2 q) const;
};

/// Principal axes are lines, not arrows: the rotation is the smaller-magnitude
/// of the two angles taking the source line onto the destination line. When
/// either mask has no dominant axis, phi and the rotation are 0. Throws
/// InvalidArgument for masks under 3 pixels.
AlignmentTransform compute_alignment(const SegMask& src, const SegMask& dst,
                                     GammaMode mode = GammaMode::SqrtArea);

struct WarpResult {
  /// Bilinear resample of the whole source image around the warped segment;
  /// zero elsewhere and wherever the inverse map leaves the source.
  ImageRgb image;
  /// Pixels whose bilinear mask coverage is >= 0.5; nullopt when the segment
  /// lands entirely off the canvas.
  std::optional<SegMask> mask;
};

WarpResult warp(const ImageRgb& src_img, const SegMask& src_mask, const AlignmentTransform& t,
                int canvas_width, int canvas_height);

struct PasteRegion {
  SegMask region;
  double overlap_ratio = 0.0;  ///< area(region) / area(destination mask)
};

struct PasteDecision {
  std::optional<PasteRegion> paste;
  double overlap_ratio = 0.0;
  bool disjoint = false;
};

/// Intersects the warped source with the destination mask. `paste` is empty
/// when they are disjoint or the overlap ratio is below `min_overlap`.
PasteDecision paste_region(const SegMask& warped_mask, const SegMask& dst_mask,
                           double min_overlap);

struct PoissonOptions {
  double omega = 1.9;
  /// Largest acceptable relative residual; worse than this after max_sweeps
  /// is a non-convergence.
  double tolerance = 1e-6;
  /// Sweeps continue down to this residual. A 1e-6 relative residual can
  /// still leave ~1e-4 absolute error on full-range 8-bit data.
  double target = 1e-8;
  int max_sweeps = 10000;
};

/// Raised when SOR stops at max_sweeps above tolerance.
class PoissonNonConvergence : public Error {
 public:
  PoissonNonConvergence(double residual, int sweeps);
  double residual() const { return residual_; }
  int sweeps() const { return sweeps_; }

 private:
  double residual_;
  int sweeps_;
};

/// Unclamped solution of the seamless-cloning system over a region.
struct PoissonSolution {
  /// Raster offsets of the unknowns, in row-major order.
  std::vector<std::int64_t> offsets;
  /// Per channel, one value per unknown.
  std::array<std::vector<double>, 3> values;
  /// Per channel discrete Laplacian of the source (the guidance term).
  std::array<std::vector<double>, 3> guidance;
  /// ||b - A f|| / max(||b||, 1) per channel.
  std::array<double, 3> relative_residual{};
  int sweeps = 0;  ///< most sweeps taken by any channel
};

/// For every region pixel p, per channel:
///   sum_{q in N4(p)} (f_p - f_q) = sum_{q in N4(p)} (g_p - g_q)
/// with f_q fixed to the destination outside the region. Gauss-Seidel with
/// over-relaxation in row-major order. Throws InvalidArgument if the region
/// touches the image border or the images differ in size, and
/// PoissonNonConvergence if the tolerance is not reached within max_sweeps.
PoissonSolution solve_poisson(const ImageRgb& dst, const ImageRgb& src, const SegMask& region,
                              const PoissonOptions& options = {});

struct BlendResult {
  ImageRgb image;
  std::array<double, 3> relative_residual{};
  int sweeps = 0;
  /// The unrounded solve, kept for debug dumps.
  PoissonSolution solution;
};

/// solve_poisson, then rounds and clamps the region into a copy of `dst`.
/// Pixels outside the region are copied unchanged.
BlendResult poisson_blend(const ImageRgb& dst, const ImageRgb& src, const SegMask& region,
                          const PoissonOptions& options = {});

}  // namespace berrysmith
