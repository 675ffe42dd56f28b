#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "berrysmith/blend.hpp"
#include "berrysmith/edges.hpp"
#include "berrysmith/image.hpp"
#include "berrysmith/manifest.hpp"
#include "berrysmith/random.hpp"
#include "berrysmith/seg_mask.hpp"
#include "berrysmith/tuner.hpp"

namespace berrysmith {

struct GenerationConfig {
  int n_syn = 1;              ///< berries pasted per synthetic sample
  double min_overlap = 0.5;   ///< area(paste) / area(destination) lower bound
  std::uint64_t seed = 0;
  GammaMode gamma_mode = GammaMode::SqrtArea;
  bool overlap_guard = true;
  /// Emit one image per paste instead of accumulating all pastes into one.
  bool one_image_per_paste = false;
  /// Erode masks before counting edge pixels so the mask outline is ignored.
  bool erode_guard = true;
  /// Segment images without a mask manifest with the Otsu fallback.
  bool fallback_segmentation = false;
  std::int64_t min_area = 64;  ///< fallback segmentation only
  int max_resamples = 5;       ///< extra destination draws per rejected berry
  /// When set, guidance and blend planes of every paste are written here.
  std::optional<std::filesystem::path> debug_dir;

  /// Throws InvalidArgument.
  void validate() const;
};

struct SyntheticRecord {
  std::string output_path;
  int paste_index = 0;
  std::string source_anomalous_image;
  std::string source_mask_id;
  std::string destination_image;
  std::string destination_mask_id;
  double gamma = 0.0;
  double linear_scale = 0.0;
  double phi = 0.0;
  double signed_rotation = 0.0;
  double overlap_ratio = 0.0;
  double source_edge_ratio = 0.0;
  std::int64_t paste_area = 0;
  int attempts = 0;
  double blend_residual = 0.0;  ///< worst channel
  int blend_sweeps = 0;
  std::string seed_stream;
  DcedParams dced_params;
  bool edge_guard = true;
  GammaMode gamma_mode = GammaMode::SqrtArea;
};

std::string record_to_json(const SyntheticRecord& record);

/// Masks ranked by masked edge ratio, highest first, ties by mask id; at most n.
/// Throws InvalidArgument for an empty set or n < 1.
std::vector<SegMask> select_edgiest(const MaskSet& masks, const ImageRgb& img,
                                    const DcedParams& params, int n, bool erode_guard = true);

struct EdgiestMask {
  SegMask mask;
  double edge_ratio = 0.0;
};

std::vector<EdgiestMask> rank_edgiest(const MaskSet& masks, const ImageGray& gray,
                                      const DcedParams& params, int n, bool erode_guard);

struct SampleOutput {
  ImageRgb image;
  /// Paste regions blended into this image, in paste order.
  std::vector<SegMask> regions;
  std::vector<SyntheticRecord> records;
};

struct SampleResult {
  /// One image normally; one per successful paste with one_image_per_paste.
  std::vector<SampleOutput> outputs;
  /// Reason codes of skipped destination draws, e.g. "low_overlap".
  std::vector<std::string> berry_rejections;
  /// Set when no output was produced.
  std::optional<std::string> rejection;
};

/// Pastes the cfg.n_syn edgiest source berries onto destination berries drawn
/// from `good_masks`. Both mask sets should already be filtered. Records carry
/// everything but output_path and seed_stream.
SampleResult generate_sample(const ImageRgb& bad_img, const MaskSet& bad_masks,
                             const ImageRgb& good_img, const MaskSet& good_masks,
                             const GenerationConfig& cfg, const DcedParams& params,
                             RandomStream& rng);

struct SampleRejection {
  std::string anomalous_image;
  std::string reason;
};

struct GenerationReport {
  DatasetManifest synthetic;
  std::vector<SyntheticRecord> records;
  std::vector<SampleRejection> rejections;
  std::size_t inputs = 0;
  std::map<std::string, std::size_t> berry_rejections;
};

/// Path of the mask manifest for dataset image `relpath`.
std::filesystem::path mask_manifest_path(const std::filesystem::path& mask_root,
                                         const std::string& relpath);

/// Loads the image's mask manifest, or segments it when the manifest is
/// missing and fallback segmentation is enabled. Throws DataError otherwise.
MaskSet load_masks(const std::filesystem::path& mask_root, const std::string& relpath,
                   const ImageRgb& img, const GenerationConfig& cfg);

/// One synthetic sample per anomalous entry, paired with a normal entry drawn
/// from a stream seeded by (cfg.seed, anomalous path). Images are written under
/// output_root mirroring the input layout; the returned manifest and records
/// are sorted by output path and independent of `workers`.
GenerationReport generate_dataset(const DatasetManifest& train,
                                  const std::filesystem::path& dataset_root,
                                  const std::filesystem::path& mask_root, const TunedDced& tuned,
                                  const GenerationConfig& cfg,
                                  const std::filesystem::path& output_root, int workers);

/// synthetic_manifest.json, records.jsonl and summary.json under output_root.
void write_generation_report(const std::filesystem::path& output_root,
                             const GenerationReport& report);

std::string generation_summary_json(const GenerationReport& report);

}  // namespace berrysmith
