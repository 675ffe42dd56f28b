#include "berrysmith/cli.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/fmt/fmt.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>
#include <toml.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>

#include "berrysmith/error.hpp"
#include "berrysmith/manifest.hpp"
#include "berrysmith/mask_codec.hpp"
#include "berrysmith/parallel.hpp"
#include "berrysmith/pipeline.hpp"
#include "berrysmith/png_io.hpp"
#include "berrysmith/segment.hpp"
#include "berrysmith/tuner.hpp"

namespace fs = std::filesystem;

namespace berrysmith {
namespace {

void configure_logging() {
  static std::once_flag once;
  std::call_once(once, [] {
    auto logger = spdlog::stderr_color_mt("berrysmith");
    logger->set_pattern("[%l] %v");
    spdlog::set_default_logger(logger);
    spdlog::level::level_enum level = spdlog::level::warn;
    if (const char* env = std::getenv("BERRYSMITH_LOG")) level = spdlog::level::from_str(env);
    spdlog::set_level(level);
  });
}

// TOML config reader. Keys use underscores for dashes. Top-level keys apply to
// every subcommand that has the option; [subcommand] tables apply to one.
class TomlConfig : public CLI::Config {
 public:
  explicit TomlConfig(const CLI::App* app) : app_(app) {}

  std::string to_config(const CLI::App*, bool, bool, std::string) const override { return {}; }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    std::ostringstream ss;
    ss << input.rdbuf();
    toml::table root;
    try {
      root = toml::parse(ss.str());
    } catch (const toml::parse_error& e) {
      throw CLI::ConfigError(fmt::format("config line {}: {}", e.source().begin.line,
                                         e.description()));
    }
    std::vector<CLI::ConfigItem> items;
    for (const auto& [key, node] : root) {
      const std::string name = option_name(key.str());
      if (const toml::table* section = node.as_table()) {
        for (const auto& [sub_key, sub_node] : *section) {
          if (sub_node.is_table()) {
            throw CLI::ConfigError("config: nested table [" + std::string(key.str()) + "." +
                                   std::string(sub_key.str()) + "] is not supported");
          }
          items.push_back({{std::string(key.str())}, option_name(sub_key.str()),
                           values_of(sub_node, sub_key.str())});
        }
        continue;
      }
      bool used = false;
      for (const CLI::App* sub : app_->get_subcommands({})) {
        if (sub->get_option_no_throw("--" + name) != nullptr) {
          items.push_back({{sub->get_name()}, name, values_of(node, key.str())});
          used = true;
        }
      }
      if (!used) throw CLI::ConfigError("config: unknown key '" + std::string(key.str()) + "'");
    }
    return items;
  }

 private:
  static std::string option_name(std::string_view key) {
    std::string s(key);
    std::replace(s.begin(), s.end(), '_', '-');
    return s;
  }

  static std::string scalar(const toml::node& node, std::string_view key) {
    if (auto v = node.value<std::string>(); v && node.is_string()) return *v;
    if (node.is_boolean()) return *node.value<bool>() ? "true" : "false";
    if (node.is_integer()) return std::to_string(*node.value<std::int64_t>());
    if (node.is_floating_point()) return fmt::format("{}", *node.value<double>());
    throw CLI::ConfigError("config: unsupported value for '" + std::string(key) + "'");
  }

  static std::vector<std::string> values_of(const toml::node& node, std::string_view key) {
    std::vector<std::string> out;
    if (const toml::array* arr = node.as_array()) {
      for (const toml::node& el : *arr) out.push_back(scalar(el, key));
    } else {
      out.push_back(scalar(node, key));
    }
    return out;
  }

  const CLI::App* app_;
};

struct CommonOptions {
  std::uint64_t seed = 0;
  int workers = 1;
};

void add_common(CLI::App* sub, CommonOptions& common) {
  sub->add_option("--seed", common.seed, "Master random seed")->capture_default_str();
  sub->add_option("--workers", common.workers, "Worker threads")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
}

void require_file(const fs::path& path, const std::string& what) {
  if (!fs::is_regular_file(path)) throw DataError(what + " not found: " + path.string());
}

void require_dir(const fs::path& path, const std::string& what) {
  if (!fs::is_directory(path)) throw DataError(what + " not found: " + path.string());
}

std::vector<LabeledPatch> load_patches(const DatasetManifest& m, const fs::path& root) {
  std::vector<LabeledPatch> out;
  out.reserve(m.entries.size());
  for (const ManifestEntry& e : m.entries) {
    out.push_back({to_grayscale(read_png(root / e.path)), e.label});
  }
  return out;
}

DatasetManifest select_fold(const DatasetManifest& m, int fold, bool keep) {
  DatasetManifest out;
  for (const ManifestEntry& e : m.entries) {
    if (!e.fold) throw DataError("entry '" + e.path + "' has no fold assigned");
    if ((*e.fold == fold) == keep) out.entries.push_back(e);
  }
  return out;
}

nlohmann::ordered_json metric_value(double v, bool undefined) {
  return undefined ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(v);
}

std::string format_number(double v) { return fmt::format("{}", v); }

// ---------------------------------------------------------------------------

struct TuneArgs {
  fs::path manifest;
  fs::path dataset_root = ".";
  fs::path output_root;
  fs::path validation_manifest;
  std::optional<int> val_fold;
  std::vector<double> thresholds;
  std::vector<int> kernels;
  int top_m = 25;
};

int cmd_tune(const TuneArgs& a, const CommonOptions& common, std::ostream& out) {
  require_file(a.manifest, "manifest");
  require_dir(a.dataset_root, "dataset root");
  if (!a.validation_manifest.empty()) require_file(a.validation_manifest, "validation manifest");
  if (!a.validation_manifest.empty() && a.val_fold) {
    throw ConfigError("--validation-manifest and --val-fold are mutually exclusive");
  }
  GridSpec spec;
  if (!a.thresholds.empty()) spec.threshold_values = a.thresholds;
  if (!a.kernels.empty()) spec.kernel_sizes = a.kernels;
  spec.validate();

  DatasetManifest train = read_manifest(a.manifest);
  std::optional<DatasetManifest> validation;
  if (a.val_fold) {
    validation = select_fold(train, *a.val_fold, true);
    train = select_fold(train, *a.val_fold, false);
  } else if (!a.validation_manifest.empty()) {
    validation = read_manifest(a.validation_manifest);
  }

  const auto train_patches = load_patches(train, a.dataset_root);
  spdlog::info("tuning on {} patches, {} candidates", train_patches.size(),
               enumerate_grid(spec).size());
  TuneReport report = tune_report(train_patches, spec, common.workers);
  if (validation) {
    select_by_validation(report, load_patches(*validation, a.dataset_root), a.top_m);
  }

  fs::create_directories(a.output_root);
  write_tuned_dced(a.output_root / "tuned_dced.json", report.best);
  std::ofstream csv(a.output_root / "tune_report.csv", std::ios::binary);
  if (!csv) throw DataError("cannot write " + (a.output_root / "tune_report.csv").string());
  csv << "kernel_size,wth_min,wth_max,nth_min,nth_max,count_threshold,train_ba,val_ba\n";
  for (const CandidateScore& c : report.candidates) {
    csv << c.params.kernel_size << ',' << format_number(c.params.wide.th_min) << ','
        << format_number(c.params.wide.th_max) << ',' << format_number(c.params.narrow.th_min)
        << ',' << format_number(c.params.narrow.th_max) << ','
        << format_number(c.count_threshold) << ',' << format_number(c.train_balanced_accuracy)
        << ',' << (c.val_balanced_accuracy ? format_number(*c.val_balanced_accuracy) : "")
        << '\n';
  }
  out << tuned_dced_to_json(report.best);
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct GenerateArgs {
  fs::path manifest;
  fs::path dataset_root = ".";
  fs::path mask_root;
  fs::path model;
  fs::path output_root;
  GenerationConfig cfg;
  std::string gamma_mode = "sqrt_area";
  bool no_overlap_guard = false;
  bool no_edge_guard = false;
  bool debug = false;
};

int cmd_generate(GenerateArgs a, const CommonOptions& common, std::ostream& out,
                 std::ostream& err) {
  require_file(a.manifest, "manifest");
  require_file(a.model, "tuned model");
  require_dir(a.dataset_root, "dataset root");
  if (a.mask_root.empty()) a.mask_root = a.dataset_root;
  if (!a.cfg.fallback_segmentation) require_dir(a.mask_root, "mask root");
  const auto mode = parse_gamma_mode(a.gamma_mode);
  if (!mode) throw ConfigError("unknown gamma mode '" + a.gamma_mode + "'");
  a.cfg.gamma_mode = *mode;
  a.cfg.overlap_guard = !a.no_overlap_guard;
  a.cfg.erode_guard = !a.no_edge_guard;
  a.cfg.seed = common.seed;
  if (a.debug) a.cfg.debug_dir = a.output_root / "debug";
  a.cfg.validate();

  const DatasetManifest train = read_manifest(a.manifest);
  const TunedDced tuned = read_tuned_dced(a.model);
  const GenerationReport report = generate_dataset(train, a.dataset_root, a.mask_root, tuned,
                                                   a.cfg, a.output_root, common.workers);
  write_generation_report(a.output_root, report);
  out << generation_summary_json(report);
  for (const SampleRejection& r : report.rejections) {
    spdlog::info("rejected {}: {}", r.anomalous_image, r.reason);
  }
  if (report.inputs > 0 && report.synthetic.entries.empty()) {
    err << "no synthetic samples were generated from " << report.inputs << " inputs\n";
    return kExitData;
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct SplitArgs {
  fs::path manifest;
  fs::path output_root;
  int k = 3;
};

int cmd_split(const SplitArgs& a, const CommonOptions& common, std::ostream& out) {
  require_file(a.manifest, "manifest");
  const DatasetManifest split = split_folds(read_manifest(a.manifest), a.k, common.seed);
  fs::create_directories(a.output_root);
  write_manifest(a.output_root / "folds_manifest.json", split);
  std::vector<std::size_t> per_fold(static_cast<std::size_t>(a.k), 0);
  for (const ManifestEntry& e : split.entries) ++per_fold[static_cast<std::size_t>(*e.fold)];
  nlohmann::ordered_json j;
  j["folds"] = per_fold;
  out << j.dump() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct AugmentArgs {
  fs::path real;
  fs::path synthetic;
  fs::path output_root;
  std::string mode = "addition";
  double pct = 100.0;
  std::string synthetic_prefix;
};

int cmd_augment(const AugmentArgs& a, const CommonOptions& common, std::ostream& out) {
  require_file(a.real, "real manifest");
  require_file(a.synthetic, "synthetic manifest");
  const auto mode = parse_augment_mode(a.mode);
  if (!mode) throw ConfigError("unknown augment mode '" + a.mode + "'");
  DatasetManifest synthetic = read_manifest(a.synthetic);
  if (!a.synthetic_prefix.empty()) {
    for (ManifestEntry& e : synthetic.entries) {
      e.path = (fs::path(a.synthetic_prefix) / e.path).generic_string();
    }
  }
  const DatasetManifest real = read_manifest(a.real);
  const DatasetManifest augmented = augment_manifest(real, synthetic, *mode, a.pct, common.seed);
  fs::create_directories(a.output_root);
  write_manifest(a.output_root / "augmented_manifest.json", augmented);
  nlohmann::ordered_json j;
  j["entries"] = augmented.entries.size();
  j["normal"] = augmented.count(Label::Normal);
  j["anomalous"] = augmented.count(Label::Anomalous);
  out << j.dump() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct ClassifyArgs {
  fs::path manifest;
  fs::path dataset_root = ".";
  fs::path model;
  fs::path output_root;
  std::optional<int> fold;
  bool dump_edges = false;
};

int cmd_classify(const ClassifyArgs& a, const CommonOptions& common, std::ostream& out) {
  require_file(a.manifest, "manifest");
  require_file(a.model, "tuned model");
  require_dir(a.dataset_root, "dataset root");
  if (a.dump_edges && a.output_root.empty()) {
    throw ConfigError("--dump-edges needs --output-root");
  }
  DatasetManifest m = read_manifest(a.manifest);
  if (a.fold) m = select_fold(m, *a.fold, true);
  const TunedDced model = read_tuned_dced(a.model);

  std::vector<Label> predictions(m.entries.size());
  std::vector<Label> truths(m.entries.size());
  parallel_for(m.entries.size(), common.workers, [&](std::size_t i) {
    const ManifestEntry& e = m.entries[i];
    const ImageGray patch = to_grayscale(read_png(a.dataset_root / e.path));
    const DcedResult r = dced(patch, model.params);
    predictions[i] = static_cast<double>(r.diff_count) > model.count_threshold ? Label::Anomalous
                                                                                 : Label::Normal;
    truths[i] = e.label;
    if (a.dump_edges) {
      fs::path stem = a.output_root / "edges" / e.path;
      stem.replace_extension();
      fs::create_directories(stem.parent_path());
      const std::string base = stem.string();
      write_png_bilevel(base + "_wide.png", r.wide.width, r.wide.height, r.wide.edges);
      write_png_bilevel(base + "_narrow.png", r.narrow.width, r.narrow.height, r.narrow.edges);
      write_png_bilevel(base + "_diff.png", r.diff.width, r.diff.height, r.diff.edges);
    }
  });

  const Metrics metrics = evaluate(predictions, truths);
  nlohmann::ordered_json j;
  j["Balanced Acc."] = metric_value(metrics.balanced_accuracy, metrics.balanced_accuracy_undefined);
  j["F1-Score"] = metric_value(metrics.f1, metrics.f1_undefined);
  j["Precision"] = metric_value(metrics.precision, metrics.precision_undefined);
  j["Recall"] = metric_value(metrics.recall, metrics.recall_undefined);
  j["tp"] = metrics.tp;
  j["tn"] = metrics.tn;
  j["fp"] = metrics.fp;
  j["fn"] = metrics.fn;
  const std::string text = j.dump(2) + "\n";
  if (!a.output_root.empty()) {
    fs::create_directories(a.output_root);
    std::ofstream(a.output_root / "metrics.json", std::ios::binary) << text;
  }
  out << text;
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct SegmentArgs {
  fs::path manifest;
  fs::path dataset_root = ".";
  fs::path output_root;
  std::int64_t min_area = 64;
};

int cmd_segment_fallback(const SegmentArgs& a, const CommonOptions& common, std::ostream& out) {
  require_file(a.manifest, "manifest");
  require_dir(a.dataset_root, "dataset root");
  if (a.min_area < 1) throw ConfigError("--min-area must be positive");
  const DatasetManifest m = read_manifest(a.manifest);
  std::vector<std::size_t> counts(m.entries.size(), 0);
  parallel_for(m.entries.size(), common.workers, [&](std::size_t i) {
    const std::string& rel = m.entries[i].path;
    const MaskSet set = segment_fallback(read_png(a.dataset_root / rel), a.min_area, rel);
    const fs::path target = mask_manifest_path(a.output_root, rel);
    fs::create_directories(target.parent_path());
    write_maskset(target, set);
    counts[i] = set.masks.size();
  });
  std::size_t total = 0;
  for (std::size_t c : counts) total += c;
  nlohmann::ordered_json j;
  j["images"] = m.entries.size();
  j["masks"] = total;
  out << j.dump() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct ValidateArgs {
  std::vector<fs::path> files;
  bool allow_noncanonical = false;
};

int cmd_masks_validate(const ValidateArgs& a, std::ostream& out) {
  bool ok = true;
  for (const fs::path& path : a.files) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
      out << "ERROR " << path.string() << ": cannot open\n";
      ok = false;
      continue;
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    const MaskValidation v = validate_maskset_bytes(ss.str());
    if (!v.valid) {
      out << "INVALID " << path.string() << ": " << v.message << '\n';
      ok = false;
    } else if (!v.canonical) {
      out << "NONCANONICAL " << path.string() << ": " << v.message << '\n';
      ok = ok && a.allow_noncanonical;
    } else {
      out << "OK " << path.string() << '\n';
    }
  }
  return ok ? kExitOk : kExitData;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  configure_logging();

  CLI::App app{"Synthetic anomaly generation for fruit imagery"};
  app.name("berrysmith");
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML config file; command-line flags take precedence");
  app.config_formatter(std::make_shared<TomlConfig>(&app));
  app.allow_config_extras(CLI::config_extras_mode::error);

  CommonOptions common;

  TuneArgs tune;
  auto* tune_cmd = app.add_subcommand("tune", "Grid-search DCED parameters on labeled patches");
  tune_cmd->add_option("--manifest", tune.manifest, "Training manifest")->required();
  tune_cmd->add_option("--dataset-root", tune.dataset_root, "Root of manifest paths");
  tune_cmd->add_option("--output-root", tune.output_root, "Output directory")->required();
  tune_cmd->add_option("--validation-manifest", tune.validation_manifest,
                       "Validation manifest for re-ranking the top candidates");
  tune_cmd->add_option("--val-fold", tune.val_fold, "Use this fold of --manifest as validation");
  tune_cmd->add_option("--thresholds", tune.thresholds, "Threshold grid values");
  tune_cmd->add_option("--kernels", tune.kernels, "Gaussian kernel sizes");
  tune_cmd->add_option("--top-m", tune.top_m, "Candidates re-ranked on validation")
      ->check(CLI::PositiveNumber);
  add_common(tune_cmd, common);

  GenerateArgs gen;
  auto* gen_cmd = app.add_subcommand("generate", "Generate synthetic anomalous images");
  gen_cmd->add_option("--manifest", gen.manifest, "Training manifest")->required();
  gen_cmd->add_option("--dataset-root", gen.dataset_root, "Root of manifest paths");
  gen_cmd->add_option("--mask-root", gen.mask_root,
                      "Root of <image>.masks.json files (default: dataset root)");
  gen_cmd->add_option("--model", gen.model, "tuned_dced.json from the tune command")->required();
  gen_cmd->add_option("--output-root", gen.output_root, "Output directory")->required();
  gen_cmd->add_option("--n-syn", gen.cfg.n_syn, "Berries pasted per synthetic sample")
      ->check(CLI::PositiveNumber);
  gen_cmd->add_option("--min-overlap", gen.cfg.min_overlap, "Overlap guard threshold")
      ->check(CLI::Range(0.0, 1.0));
  gen_cmd->add_flag("--no-overlap-guard", gen.no_overlap_guard, "Paste regardless of overlap");
  gen_cmd->add_option("--gamma-mode", gen.gamma_mode, "sqrt_area or literal");
  gen_cmd->add_flag("--one-image-per-paste", gen.cfg.one_image_per_paste,
                    "Write one image per pasted berry");
  gen_cmd->add_flag("--no-edge-guard", gen.no_edge_guard,
                    "Count edge pixels on the mask outline too");
  gen_cmd->add_flag("--fallback-segmentation", gen.cfg.fallback_segmentation,
                    "Segment images that have no mask manifest");
  gen_cmd->add_option("--min-area", gen.cfg.min_area, "Fallback segmentation minimum area");
  gen_cmd->add_option("--max-resamples", gen.cfg.max_resamples,
                      "Destination resamples per rejected berry");
  gen_cmd->add_flag("--debug", gen.debug, "Write guidance and region planes to <output>/debug");
  add_common(gen_cmd, common);

  SplitArgs split;
  auto* split_cmd = app.add_subcommand("split", "Assign cross-validation folds");
  split_cmd->add_option("--manifest", split.manifest, "Dataset manifest")->required();
  split_cmd->add_option("--output-root", split.output_root, "Output directory")->required();
  split_cmd->add_option("--k", split.k, "Number of folds")->check(CLI::Range(2, 1000));
  add_common(split_cmd, common);

  AugmentArgs aug;
  auto* aug_cmd = app.add_subcommand("augment", "Build an addition or substitution manifest");
  aug_cmd->add_option("--real", aug.real, "Real training manifest")->required();
  aug_cmd->add_option("--synthetic", aug.synthetic, "Synthetic manifest")->required();
  aug_cmd->add_option("--output-root", aug.output_root, "Output directory")->required();
  aug_cmd->add_option("--mode", aug.mode, "addition or substitution");
  aug_cmd->add_option("--pct", aug.pct, "Percentage in (0, 100]");
  aug_cmd->add_option("--synthetic-prefix", aug.synthetic_prefix,
                      "Prefix joined to synthetic paths");
  add_common(aug_cmd, common);

  ClassifyArgs cls;
  auto* cls_cmd = app.add_subcommand("classify", "Evaluate the edge-count baseline classifier");
  cls_cmd->add_option("--manifest", cls.manifest, "Labeled manifest")->required();
  cls_cmd->add_option("--dataset-root", cls.dataset_root, "Root of manifest paths");
  cls_cmd->add_option("--model", cls.model, "tuned_dced.json")->required();
  cls_cmd->add_option("--output-root", cls.output_root, "Where metrics and edge dumps go");
  cls_cmd->add_option("--fold", cls.fold, "Evaluate only this fold");
  cls_cmd->add_flag("--dump-edges", cls.dump_edges, "Write wide/narrow/diff edge maps as PNG");
  add_common(cls_cmd, common);

  SegmentArgs seg;
  auto* seg_cmd =
      app.add_subcommand("segment-fallback", "Write Otsu-based mask manifests for images");
  seg_cmd->add_option("--manifest", seg.manifest, "Manifest listing the images")->required();
  seg_cmd->add_option("--dataset-root", seg.dataset_root, "Root of manifest paths");
  seg_cmd->add_option("--output-root", seg.output_root, "Mask root to write")->required();
  seg_cmd->add_option("--min-area", seg.min_area, "Smallest component kept");
  add_common(seg_cmd, common);

  ValidateArgs val;
  auto* val_cmd = app.add_subcommand("masks-validate", "Check mask manifest files");
  val_cmd->add_option("files", val.files, "Manifest files")->required();
  val_cmd->add_flag("--allow-noncanonical", val.allow_noncanonical,
                    "Accept valid files whose bytes are not canonical");
  add_common(val_cmd, common);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  }

  try {
    if (*tune_cmd) return cmd_tune(tune, common, out);
    if (*gen_cmd) return cmd_generate(gen, common, out, err);
    if (*split_cmd) return cmd_split(split, common, out);
    if (*aug_cmd) return cmd_augment(aug, common, out);
    if (*cls_cmd) return cmd_classify(cls, common, out);
    if (*seg_cmd) return cmd_segment_fallback(seg, common, out);
    if (*val_cmd) return cmd_masks_validate(val, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DataError& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
  return kExitInternal;
}

}  // namespace berrysmith
