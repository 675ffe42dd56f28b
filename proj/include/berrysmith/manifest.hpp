#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "berrysmith/label.hpp"

namespace berrysmith {

inline constexpr int kDatasetManifestSchemaVersion = 1;

struct ManifestEntry {
  std::string path;  ///< relative to the dataset (or output) root
  Label label = Label::Normal;
  /// Field image the patch was cut from; folds never split a group.
  std::string source_image_group;
  std::optional<int> fold;

  bool operator==(const ManifestEntry&) const = default;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;

  /// Throws DataError on duplicate paths, empty paths or negative folds.
  void validate() const;
  std::size_t count(Label label) const;

  bool operator==(const DatasetManifest&) const = default;
};

std::string manifest_to_json(const DatasetManifest& manifest);
DatasetManifest manifest_from_json(std::string_view text);
DatasetManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);

/// Assigns folds in [0, k) per source_image_group, stratified by label: the
/// groups of each class (a mixed group counts by its majority label) are
/// shuffled and dealt round-robin, and the second class continues where the
/// first stopped. Throws InvalidArgument when k < 2 or a class has fewer
/// than k groups.
DatasetManifest split_folds(const DatasetManifest& manifest, int k, std::uint64_t seed);

enum class AugmentMode { Addition, Substitution };

const char* to_string(AugmentMode m);
std::optional<AugmentMode> parse_augment_mode(std::string_view s);

/// Addition appends floor(pct/100 * |synthetic|) sampled synthetic entries.
/// Substitution removes floor(pct/100 * |real anomalous|) sampled real
/// anomalous entries and appends as many synthetic ones. Normal entries are
/// untouched. Throws InvalidArgument for pct outside (0, 100], a synthetic
/// pool that is too small, or colliding paths.
DatasetManifest augment_manifest(const DatasetManifest& real, const DatasetManifest& synthetic,
                                 AugmentMode mode, double pct, std::uint64_t seed);

/// floor(pct / 100 * n), robust to representation error in pct.
std::size_t percentage_count(double pct, std::size_t n);

}  // namespace berrysmith
