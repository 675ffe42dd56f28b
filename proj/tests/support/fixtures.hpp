#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "berrysmith/edges.hpp"
#include "berrysmith/image.hpp"
#include "berrysmith/manifest.hpp"
#include "berrysmith/seg_mask.hpp"
#include "berrysmith/tuner.hpp"

namespace berrysmith::fx {

struct Ellipse {
  double cx = 0.0;
  double cy = 0.0;
  double a = 1.0;      // semi-axis along `angle`
  double b = 1.0;
  double angle = 0.0;  // radians, y axis down
};

std::vector<std::uint8_t> rasterize(int width, int height, const Ellipse& e);
SegMask ellipse_mask(int width, int height, const Ellipse& e, std::string id,
                     std::string source = {});

struct Berry {
  Ellipse shape;
  bool textured = false;
};

struct FixtureImage {
  ImageRgb image;
  MaskSet masks;
};

/// Dark leafy background with shaded berries; textured berries get brown
/// speckles. Masks are the exact berry rasters, ids "b0", "b1", ...
FixtureImage grape_image(int width, int height, std::span<const Berry> berries,
                         std::uint64_t seed, const std::string& source);

/// Nearly uniform patch: a faint gradient plus +-1 noise.
ImageGray flat_patch(int size, std::uint64_t seed);
/// Same base as flat_patch with scattered high-contrast speckles.
ImageGray speckled_patch(int size, std::uint64_t seed);

/// A DCED tuple that separates flat from speckled patches.
DcedParams fixture_params();

struct Corpus {
  std::filesystem::path root;  // dataset root
  std::filesystem::path manifest;
  std::filesystem::path mask_root;
  std::filesystem::path model;
  DatasetManifest entries;
};

struct CorpusOptions {
  int anomalous = 4;
  int normal = 6;
  int width = 200;
  int height = 100;
  std::uint64_t seed = 1;
  /// Berry size relative to the default layout; 0 scales berries with height.
  double berry_scale = 0.0;
  /// Adds one anomalous image whose only berry is too thin to ever pass the
  /// overlap guard.
  bool failing_pair = false;
  /// Write mask manifests (otherwise only fallback segmentation works).
  bool write_masks = true;
};

Corpus write_corpus(const std::filesystem::path& root, const CorpusOptions& options);

/// Fresh empty directory under the system temp dir.
std::filesystem::path scratch_dir(const std::string& name);

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);

/// Relative path -> bytes for every regular file under root.
std::vector<std::pair<std::string, std::vector<std::uint8_t>>> snapshot_tree(
    const std::filesystem::path& root);

std::vector<LabeledPatch> patch_set(int per_class, int size, std::uint64_t seed);

}  // namespace berrysmith::fx
