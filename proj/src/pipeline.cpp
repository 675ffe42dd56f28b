#include "berrysmith/pipeline.hpp"

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <tuple>

#include "berrysmith/error.hpp"
#include "berrysmith/mask_codec.hpp"
#include "berrysmith/parallel.hpp"
#include "berrysmith/png_io.hpp"
#include "berrysmith/segment.hpp"

namespace fs = std::filesystem;

namespace berrysmith {

void GenerationConfig::validate() const {
  if (n_syn < 1) throw InvalidArgument("n_syn must be at least 1");
  if (!(min_overlap >= 0.0 && min_overlap <= 1.0)) {
    throw InvalidArgument("min_overlap must be in [0, 1]");
  }
  if (min_area < 1) throw InvalidArgument("min_area must be positive");
  if (max_resamples < 0) throw InvalidArgument("max_resamples must be >= 0");
}

std::string record_to_json(const SyntheticRecord& r) {
  nlohmann::ordered_json j;
  j["output_path"] = r.output_path;
  j["paste_index"] = r.paste_index;
  j["source_anomalous_image"] = r.source_anomalous_image;
  j["source_mask_id"] = r.source_mask_id;
  j["destination_image"] = r.destination_image;
  j["destination_mask_id"] = r.destination_mask_id;
  j["gamma"] = r.gamma;
  j["gamma_mode"] = to_string(r.gamma_mode);
  j["linear_scale"] = r.linear_scale;
  j["phi"] = r.phi;
  j["signed_rotation"] = r.signed_rotation;
  j["overlap_ratio"] = r.overlap_ratio;
  j["source_edge_ratio"] = r.source_edge_ratio;
  j["paste_area"] = r.paste_area;
  j["attempts"] = r.attempts;
  j["blend_residual"] = r.blend_residual;
  j["blend_sweeps"] = r.blend_sweeps;
  j["seed_stream"] = r.seed_stream;
  j["dced_params"] = {{"kernel_size", r.dced_params.kernel_size},
                      {"wth_min", r.dced_params.wide.th_min},
                      {"wth_max", r.dced_params.wide.th_max},
                      {"nth_min", r.dced_params.narrow.th_min},
                      {"nth_max", r.dced_params.narrow.th_max}};
  j["edge_guard"] = r.edge_guard;
  return j.dump();
}

std::vector<EdgiestMask> rank_edgiest(const MaskSet& masks, const ImageGray& gray,
                                      const DcedParams& params, int n, bool erode_guard) {
  if (masks.masks.empty()) throw InvalidArgument("select_edgiest on an empty mask set");
  if (n < 1) throw InvalidArgument("select_edgiest needs n >= 1");
  std::vector<EdgiestMask> ranked;
  ranked.reserve(masks.masks.size());
  for (const SegMask& m : masks.masks) {
    ranked.push_back({m, masked_edge_stats(gray, m, params, erode_guard).edge_ratio});
  }
  std::sort(ranked.begin(), ranked.end(), [](const EdgiestMask& a, const EdgiestMask& b) {
    if (a.edge_ratio != b.edge_ratio) return a.edge_ratio > b.edge_ratio;
    return a.mask.mask_id() < b.mask.mask_id();
  });
  if (ranked.size() > static_cast<std::size_t>(n)) ranked.erase(ranked.begin() + n, ranked.end());
  return ranked;
}

std::vector<SegMask> select_edgiest(const MaskSet& masks, const ImageRgb& img,
                                    const DcedParams& params, int n, bool erode_guard) {
  std::vector<SegMask> out;
  for (auto& e : rank_edgiest(masks, to_grayscale(img), params, n, erode_guard)) {
    out.push_back(std::move(e.mask));
  }
  return out;
}

namespace {

// The Poisson system needs a fixed neighbour on all four sides.
std::optional<SegMask> trim_border(const SegMask& region) {
  if (!region.touches_border()) return region;
  const int w = region.width();
  const int h = region.height();
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(w) * h, 0);
  region.for_each_pixel([&](int x, int y) {
    if (x > 0 && y > 0 && x < w - 1 && y < h - 1) bits[static_cast<std::size_t>(y) * w + x] = 1;
  });
  return SegMask::from_bitmap(w, h, bits, region.mask_id(), region.source_image());
}

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
}

void dump_debug(const fs::path& dir, const std::string& stem, const ImageRgb& canvas,
                const SegMask& region, const PoissonSolution& sol) {
  fs::create_directories(dir);
  const int w = canvas.width();
  const int h = canvas.height();
  std::vector<std::uint8_t> guidance(static_cast<std::size_t>(w) * h, 128);
  std::vector<std::uint8_t> change(static_cast<std::size_t>(w) * h, 128);
  for (std::size_t i = 0; i < sol.offsets.size(); ++i) {
    const auto off = static_cast<std::size_t>(sol.offsets[i]);
    double g = 0.0;
    double d = 0.0;
    for (int c = 0; c < 3; ++c) {
      g += sol.guidance[c][i];
      d += sol.values[c][i] - canvas.pixels()[off * 3 + c];
    }
    guidance[off] = to_byte(128.0 + g / 3.0);
    change[off] = to_byte(128.0 + d / 3.0);
  }
  write_png_gray(dir / (stem + "_guidance.png"), w, h, guidance);
  write_png_gray(dir / (stem + "_change.png"), w, h, change);
  write_png_bilevel(dir / (stem + "_region.png"), w, h, region.to_bitmap());
}

}  // namespace

SampleResult generate_sample(const ImageRgb& bad_img, const MaskSet& bad_masks,
                             const ImageRgb& good_img, const MaskSet& good_masks,
                             const GenerationConfig& cfg, const DcedParams& params,
                             RandomStream& rng) {
  cfg.validate();
  SampleResult result;
  if (bad_masks.masks.empty()) {
    result.rejection = "no_source_masks";
    return result;
  }
  if (good_masks.masks.empty()) {
    result.rejection = "no_destination_masks";
    return result;
  }

  const auto berries =
      rank_edgiest(bad_masks, to_grayscale(bad_img), params, cfg.n_syn, cfg.erode_guard);
  const std::size_t n_good = good_masks.masks.size();
  const bool without_replacement = n_good >= berries.size();
  std::vector<std::uint8_t> used(n_good, 0);
  const double min_overlap = cfg.overlap_guard ? cfg.min_overlap : 0.0;

  SampleOutput accumulated{good_img, {}, {}};
  for (std::size_t b = 0; b < berries.size(); ++b) {
    const SegMask& src = berries[b].mask;
    std::vector<std::uint8_t> tried(n_good, 0);
    for (int attempt = 0; attempt <= cfg.max_resamples; ++attempt) {
      std::vector<std::size_t> candidates;
      for (std::size_t j = 0; j < n_good; ++j) {
        if (!tried[j] && !(without_replacement && used[j])) candidates.push_back(j);
      }
      if (candidates.empty()) break;
      const std::size_t j = candidates[rng.uniform_index(candidates.size())];
      tried[j] = 1;
      const SegMask& dst = good_masks.masks[j];

      const AlignmentTransform t = compute_alignment(src, dst, cfg.gamma_mode);
      const WarpResult warped = warp(bad_img, src, t, good_img.width(), good_img.height());
      if (!warped.mask) {
        result.berry_rejections.emplace_back("off_canvas");
        continue;
      }
      const PasteDecision decision = paste_region(*warped.mask, dst, min_overlap);
      if (!decision.paste) {
        result.berry_rejections.emplace_back(decision.disjoint ? "disjoint" : "low_overlap");
        continue;
      }
      const auto region = trim_border(decision.paste->region);
      if (!region) {
        result.berry_rejections.emplace_back("border_only");
        continue;
      }

      const ImageRgb& base = cfg.one_image_per_paste ? good_img : accumulated.image;
      std::optional<BlendResult> blended;
      try {
        blended = poisson_blend(base, warped.image, *region);
      } catch (const PoissonNonConvergence& e) {
        spdlog::warn("{}: {}", bad_masks.source_image, e.what());
        result.berry_rejections.emplace_back("poisson_nonconvergence");
        continue;
      }

      SyntheticRecord rec;
      rec.source_anomalous_image = bad_masks.source_image;
      rec.source_mask_id = src.mask_id();
      rec.destination_image = good_masks.source_image;
      rec.destination_mask_id = dst.mask_id();
      rec.gamma = t.gamma;
      rec.linear_scale = t.linear_scale;
      rec.phi = t.phi;
      rec.signed_rotation = t.signed_rotation;
      rec.overlap_ratio = decision.overlap_ratio;
      rec.source_edge_ratio = berries[b].edge_ratio;
      rec.paste_area = region->area();
      rec.attempts = attempt + 1;
      rec.blend_residual = *std::max_element(blended->relative_residual.begin(),
                                             blended->relative_residual.end());
      rec.blend_sweeps = blended->sweeps;
      rec.dced_params = params;
      rec.edge_guard = cfg.erode_guard;
      rec.gamma_mode = cfg.gamma_mode;

      if (cfg.debug_dir) {
        std::string stem = fs::path(bad_masks.source_image).replace_extension().generic_string();
        std::replace(stem.begin(), stem.end(), '/', '_');
        stem += "_p" + std::to_string(b);
        dump_debug(*cfg.debug_dir, stem, base, *region, blended->solution);
      }

      used[j] = 1;
      if (cfg.one_image_per_paste) {
        rec.paste_index = 0;
        result.outputs.push_back({std::move(blended->image), {*region}, {rec}});
      } else {
        rec.paste_index = static_cast<int>(accumulated.records.size());
        accumulated.image = std::move(blended->image);
        accumulated.regions.push_back(*region);
        accumulated.records.push_back(std::move(rec));
      }
      break;
    }
  }
  if (!cfg.one_image_per_paste && !accumulated.records.empty()) {
    result.outputs.push_back(std::move(accumulated));
  }
  if (result.outputs.empty()) result.rejection = "all_berries_skipped";
  return result;
}

fs::path mask_manifest_path(const fs::path& mask_root, const std::string& relpath) {
  return mask_root / (relpath + ".masks.json");
}

MaskSet load_masks(const fs::path& mask_root, const std::string& relpath, const ImageRgb& img,
                   const GenerationConfig& cfg) {
  const fs::path path = mask_manifest_path(mask_root, relpath);
  if (fs::exists(path)) {
    MaskSet set = read_maskset(path);
    if (set.width != img.width() || set.height != img.height()) {
      throw DataError(path.string() + ": mask raster " + std::to_string(set.width) + "x" +
                      std::to_string(set.height) + " does not match the image");
    }
    return set;
  }
  if (!cfg.fallback_segmentation) {
    throw DataError("missing mask manifest " + path.string() +
                    " (enable fallback segmentation to segment it on the fly)");
  }
  return segment_fallback(img, cfg.min_area, relpath);
}

namespace {

std::vector<ManifestEntry> sorted_entries(const DatasetManifest& m, Label label) {
  std::vector<ManifestEntry> out;
  for (const ManifestEntry& e : m.entries) {
    if (e.label == label) out.push_back(e);
  }
  std::sort(out.begin(), out.end(),
            [](const ManifestEntry& a, const ManifestEntry& b) { return a.path < b.path; });
  return out;
}

std::string hex_seed(std::uint64_t seed) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s = "0x";
  for (int shift = 60; shift >= 0; shift -= 4) s += kDigits[(seed >> shift) & 0xf];
  return s;
}

struct ItemResult {
  std::vector<ManifestEntry> entries;
  std::vector<SyntheticRecord> records;
  std::vector<std::string> berry_rejections;
  std::optional<std::string> rejection;
};

MaskSet renamed_set(MaskSet set, const std::string& relpath) {
  set.source_image = relpath;
  for (SegMask& m : set.masks) {
    m = SegMask(m.width(), m.height(), m.runs(), m.mask_id(), relpath);
  }
  return set;
}

}  // namespace

GenerationReport generate_dataset(const DatasetManifest& train, const fs::path& dataset_root,
                                  const fs::path& mask_root, const TunedDced& tuned,
                                  const GenerationConfig& cfg, const fs::path& output_root,
                                  int workers) {
  train.validate();
  cfg.validate();
  tuned.params.validate();
  const auto anomalous = sorted_entries(train, Label::Anomalous);
  const auto normals = sorted_entries(train, Label::Normal);

  GenerationReport report;
  report.inputs = anomalous.size();
  if (anomalous.empty()) return report;
  if (normals.empty()) throw DataError("training manifest has no normal images to paste onto");

  std::vector<ItemResult> items(anomalous.size());
  parallel_for(anomalous.size(), workers, [&](std::size_t i) {
    const ManifestEntry& bad = anomalous[i];
    const std::uint64_t seed = derive_seed(cfg.seed, bad.path);
    RandomStream rng(seed);
    const ManifestEntry& good = normals[rng.uniform_index(normals.size())];

    const ImageRgb bad_img = read_png(dataset_root / bad.path);
    const ImageRgb good_img = read_png(dataset_root / good.path);
    const MaskSet bad_masks =
        filter_masks(renamed_set(load_masks(mask_root, bad.path, bad_img, cfg), bad.path));
    const MaskSet good_masks =
        filter_masks(renamed_set(load_masks(mask_root, good.path, good_img, cfg), good.path));

    SampleResult sample =
        generate_sample(bad_img, bad_masks, good_img, good_masks, cfg, tuned.params, rng);
    ItemResult& item = items[i];
    item.berry_rejections = std::move(sample.berry_rejections);
    item.rejection = sample.rejection;
    if (sample.rejection) {
      spdlog::warn("rejected {} (paired with {}): {}", bad.path, good.path, *sample.rejection);
      return;
    }

    fs::path stem = fs::path(bad.path);
    stem.replace_extension();
    for (std::size_t k = 0; k < sample.outputs.size(); ++k) {
      const std::string suffix =
          cfg.one_image_per_paste ? "_syn" + std::to_string(k) + ".png" : "_syn.png";
      const std::string rel = stem.generic_string() + suffix;
      const fs::path out = output_root / rel;
      fs::create_directories(out.parent_path());
      write_png(out, sample.outputs[k].image);
      item.entries.push_back({rel, Label::Anomalous, bad.source_image_group, bad.fold});
      for (SyntheticRecord& rec : sample.outputs[k].records) {
        rec.output_path = rel;
        rec.seed_stream = hex_seed(seed);
        item.records.push_back(std::move(rec));
      }
    }
    spdlog::debug("{}: {} image(s) from {}", bad.path, sample.outputs.size(), good.path);
  });

  for (std::size_t i = 0; i < items.size(); ++i) {
    ItemResult& item = items[i];
    for (auto& e : item.entries) report.synthetic.entries.push_back(std::move(e));
    for (auto& r : item.records) report.records.push_back(std::move(r));
    for (const auto& reason : item.berry_rejections) ++report.berry_rejections[reason];
    if (item.rejection) report.rejections.push_back({anomalous[i].path, *item.rejection});
  }
  std::sort(report.synthetic.entries.begin(), report.synthetic.entries.end(),
            [](const ManifestEntry& a, const ManifestEntry& b) { return a.path < b.path; });
  std::sort(report.records.begin(), report.records.end(),
            [](const SyntheticRecord& a, const SyntheticRecord& b) {
              return std::tie(a.output_path, a.paste_index) <
                     std::tie(b.output_path, b.paste_index);
            });
  return report;
}

std::string generation_summary_json(const GenerationReport& report) {
  nlohmann::ordered_json j;
  j["inputs"] = report.inputs;
  j["generated"] = report.synthetic.entries.size();
  j["records"] = report.records.size();
  j["rejected"] = report.rejections.size();
  nlohmann::ordered_json reasons = nlohmann::ordered_json::object();
  std::map<std::string, std::size_t> counts;
  for (const auto& r : report.rejections) ++counts[r.reason];
  for (const auto& [reason, n] : counts) reasons[reason] = n;
  j["rejection_reasons"] = reasons;
  nlohmann::ordered_json berry = nlohmann::ordered_json::object();
  for (const auto& [reason, n] : report.berry_rejections) berry[reason] = n;
  j["berry_rejections"] = berry;
  return j.dump(2) + "\n";
}

void write_generation_report(const fs::path& output_root, const GenerationReport& report) {
  fs::create_directories(output_root);
  write_manifest(output_root / "synthetic_manifest.json", report.synthetic);
  std::ofstream records(output_root / "records.jsonl", std::ios::binary);
  if (!records) throw DataError("cannot write " + (output_root / "records.jsonl").string());
  for (const SyntheticRecord& r : report.records) records << record_to_json(r) << '\n';
  std::ofstream summary(output_root / "summary.json", std::ios::binary);
  if (!summary) throw DataError("cannot write " + (output_root / "summary.json").string());
  summary << generation_summary_json(report);
}

}  // namespace berrysmith
