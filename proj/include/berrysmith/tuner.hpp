#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "berrysmith/edges.hpp"
#include "berrysmith/image.hpp"
#include "berrysmith/label.hpp"

namespace berrysmith {

/// Search space of the DCED grid search.
struct GridSpec {
  std::vector<double> threshold_values{0, 25, 50, 75, 100, 125, 150, 175, 200, 225, 250};
  std::vector<int> kernel_sizes{3, 5, 7, 9};

  /// Throws InvalidArgument unless thresholds are non-negative and strictly
  /// increasing and kernel sizes are odd and positive.
  void validate() const;
};

/// Every valid (K, wth_min, wth_max, nth_min, nth_max) of the spec, in
/// lexicographic order of kernel index then threshold indices.
std::vector<DcedParams> enumerate_grid(const GridSpec& spec);

struct Separator {
  double threshold = 0.0;
  double balanced_accuracy = 0.0;
};

/// Threshold on a count maximizing balanced accuracy of the rule
/// "count > threshold means anomalous". Candidates are one below the minimum,
/// the midpoints between consecutive distinct values, and one above the
/// maximum; ties go to the smallest threshold. Throws InvalidArgument when
/// either list is empty.
Separator best_separator(std::span<const std::int64_t> counts_normal,
                         std::span<const std::int64_t> counts_anomalous);

struct LabeledPatch {
  ImageGray image;
  Label label;
};

/// A DCED configuration with its patch-level count separator.
struct TunedDced {
  DcedParams params;
  double count_threshold = 0.0;
  double train_balanced_accuracy = 0.0;
  /// Absent until a validation split has been scored.
  std::optional<double> val_balanced_accuracy;

  bool operator==(const TunedDced&) const = default;
};

struct CandidateScore {
  DcedParams params;
  double count_threshold = 0.0;
  double train_balanced_accuracy = 0.0;
  std::optional<double> val_balanced_accuracy;
};

struct TuneReport {
  /// One row per grid candidate, in enumeration order.
  std::vector<CandidateScore> candidates;
  TunedDced best;
};

/// Exhaustive grid search on the training patches. Picks the highest training
/// balanced accuracy; ties go to the lexicographically smallest parameters.
/// Throws InvalidArgument when a class is missing.
TuneReport tune_report(std::span<const LabeledPatch> train, const GridSpec& spec,
                       int workers = 1);

TunedDced tune(std::span<const LabeledPatch> train, const GridSpec& spec, int workers = 1);

/// Re-ranks the `top_m` best training candidates by validation balanced
/// accuracy (each keeps its training threshold). Ties keep training rank.
/// Fills val_balanced_accuracy on the re-ranked rows of `report`.
TunedDced select_by_validation(TuneReport& report, std::span<const LabeledPatch> validation,
                               int top_m = 25);

/// DCED diff_count of a whole patch.
std::int64_t patch_edge_count(const ImageGray& patch, const DcedParams& params);

/// Anomalous iff the patch's diff_count is strictly above the model threshold.
Label classify_baseline(const ImageGray& patch, const TunedDced& model);

struct Metrics {
  double balanced_accuracy = 0.0;
  double f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  std::int64_t tp = 0;
  std::int64_t tn = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
  /// Ratios whose denominator was zero are reported as 0 and flagged here.
  bool precision_undefined = false;
  bool recall_undefined = false;
  bool f1_undefined = false;
  bool balanced_accuracy_undefined = false;
};

/// Confusion counts with anomalous as the positive class. Throws
/// InvalidArgument on empty or mismatched input.
Metrics evaluate(std::span<const Label> predictions, std::span<const Label> truths);

inline constexpr int kTunedDcedSchemaVersion = 1;

std::string tuned_dced_to_json(const TunedDced& model);
TunedDced tuned_dced_from_json(std::string_view text);
void write_tuned_dced(const std::filesystem::path& path, const TunedDced& model);
TunedDced read_tuned_dced(const std::filesystem::path& path);

}  // namespace berrysmith
