// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "berrysmith/blend.hpp"
#include "berrysmith/cli.hpp"
#include "berrysmith/edges.hpp"
#include "berrysmith/manifest.hpp"
#include "berrysmith/pipeline.hpp"
#include "berrysmith/principal_axis.hpp"
#include "berrysmith/tuner.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace berrysmith;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt_double(double v, int precision = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", precision, v);
  return buf;
}

int worker_count() { return std::max(1u, std::thread::hardware_concurrency()); }

ImageGray random_gray(std::mt19937& rng, int w, int h) {
  std::uniform_real_distribution<double> px(0.0, 255.0);
  std::bernoulli_distribution quantize(0.5);
  std::vector<double> v(static_cast<std::size_t>(w) * h);
  const bool integral = quantize(rng);
  for (double& x : v) x = integral ? std::round(px(rng)) : px(rng);
  return ImageGray(w, h, v);
}

std::vector<ImageGray> hand_built_fixtures() {
  std::vector<ImageGray> out;
  for (int at : {3, 6, 9}) {
    ImageGray step(12, 10, 20.0);
    for (int y = 0; y < 10; ++y) {
      for (int x = at; x < 12; ++x) step.at(x, y) = 220.0;
    }
    out.push_back(step);
    ImageGray vstep(10, 12, 40.0);
    for (int y = at; y < 12; ++y) {
      for (int x = 0; x < 10; ++x) vstep.at(x, y) = 190.0;
    }
    out.push_back(vstep);
  }
  ImageGray diag(14, 14, 30.0);
  for (int y = 0; y < 14; ++y) {
    for (int x = 0; x < 14; ++x) {
      if (x > y) diag.at(x, y) = 200.0;
    }
  }
  out.push_back(diag);
  for (double slope : {2.0, 10.0, 17.5}) {
    ImageGray ramp(16, 16);
    for (int y = 0; y < 16; ++y) {
      for (int x = 0; x < 16; ++x) ramp.at(x, y) = slope * x + 0.5 * slope * y;
    }
    out.push_back(ramp);
  }
  out.push_back(ImageGray(8, 8, 77.0));
  return out;
}

Outcome canny_oracle() {
  const auto t0 = Clock::now();
  std::mt19937 rng(2024);
  std::uniform_int_distribution<int> dim(3, 16);
  std::uniform_real_distribution<double> th(0.0, 120.0);
  const int kernels[] = {1, 3, 5, 7, 9};
  int cases = 0;
  int mismatches = 0;
  auto check = [&](const ImageGray& img, int k, double a, double b) {
    ++cases;
    if (canny(img, {a, b}, k).edges != fx::reference_canny(img, k, a, b)) ++mismatches;
  };
  for (int i = 0; i < 200; ++i) {
    const ImageGray img = random_gray(rng, dim(rng), dim(rng));
    double a = th(rng);
    double b = th(rng);
    if (a > b) std::swap(a, b);
    if (a == b) b += 1.0;
    check(img, kernels[i % 5], a, b);
  }
  for (const ImageGray& img : hand_built_fixtures()) {
    for (int k : {3, 5}) {
      for (auto [a, b] : {std::pair{5.0, 10.0}, {10.0, 30.0}, {0.0, 60.0}, {40.0, 41.0}}) {
        check(img, k, a, b);
      }
    }
  }
  const double elapsed = seconds_since(t0);
  return {mismatches == 0 && elapsed < 10.0,
          std::to_string(cases) + " cases, " + std::to_string(mismatches) + " mismatches, " +
              fmt_double(elapsed) + " s"};
}

Outcome threshold_monotonicity() {
  std::mt19937 rng(77);
  std::uniform_int_distribution<int> dim(8, 48);
  std::uniform_real_distribution<double> th(0.0, 150.0);
  const int kernels[] = {3, 5, 7, 9};
  int violations = 0;
  int count_errors = 0;
  int pairs = 0;
  for (int i = 0; i < 50; ++i) {
    const ImageGray img = random_gray(rng, dim(rng), dim(rng));
    const SuppressedMagnitude mag = suppress_non_maxima(img, kernels[i % 4]);
    for (int j = 0; j < 100; ++j) {
      std::array<double, 4> v{th(rng), th(rng), th(rng), th(rng)};
      std::sort(v.begin(), v.end());
      // wide = (v0, v2), narrow = (v1, v3) keeps both thresholds nested.
      if (v[0] == v[2] || v[1] == v[3] || v[2] == v[3]) continue;
      const DcedParams p{kernels[i % 4], {v[0], v[2]}, {v[1], v[3]}};
      if (!p.valid()) continue;
      ++pairs;
      const DcedResult r = dced(mag, p);
      for (std::size_t k = 0; k < r.wide.edges.size(); ++k) {
        if (r.narrow.edges[k] && !r.wide.edges[k]) {
          ++violations;
          break;
        }
      }
      if (r.diff_count != r.wide_count - r.narrow_count || r.diff.count() != r.diff_count) {
        ++count_errors;
      }
    }
  }
  return {violations == 0 && count_errors == 0 && pairs >= 4900,
          std::to_string(pairs) + " pairs, " + std::to_string(violations) + " violations, " +
              std::to_string(count_errors) + " count mismatches"};
}

ImageRgb random_rgb(int w, int h, std::mt19937& rng) {
  std::uniform_int_distribution<int> px(0, 255);
  ImageRgb img(w, h);
  for (auto& v : img.pixels()) v = static_cast<std::uint8_t>(px(rng));
  return img;
}

std::optional<SegMask> random_region(int w, int h, std::mt19937& rng) {
  std::uniform_int_distribution<int> side(1, 8);
  std::bernoulli_distribution on(0.75);
  const int rw = side(rng);
  const int rh = side(rng);
  std::uniform_int_distribution<int> ox(1, w - 1 - rw);
  std::uniform_int_distribution<int> oy(1, h - 1 - rh);
  const int x0 = ox(rng);
  const int y0 = oy(rng);
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(w) * h, 0);
  for (int y = y0; y < y0 + rh; ++y) {
    for (int x = x0; x < x0 + rw; ++x) bits[static_cast<std::size_t>(y) * w + x] = on(rng);
  }
  return SegMask::from_bitmap(w, h, bits, "region");
}

Outcome poisson_solver() {
  std::mt19937 rng(555);
  double worst_diff = 0.0;
  double worst_residual = 0.0;
  int regions = 0;
  int not_exact = 0;
  while (regions < 100) {
    const ImageRgb dst = random_rgb(12, 12, rng);
    const ImageRgb src = random_rgb(12, 12, rng);
    const auto region = random_region(12, 12, rng);
    if (!region) continue;
    ++regions;
    const PoissonSolution sol = solve_poisson(dst, src, *region);
    const auto ref = fx::dense_poisson(dst, src, *region);
    for (int c = 0; c < 3; ++c) {
      worst_residual = std::max(worst_residual, sol.relative_residual[c]);
      for (std::size_t i = 0; i < ref[c].size(); ++i) {
        worst_diff = std::max(worst_diff, std::abs(sol.values[c][i] - ref[c][i]));
      }
    }
    const BlendResult same = poisson_blend(dst, dst, *region);
    if (!(same.image == dst)) ++not_exact;
    for (double r : same.relative_residual) worst_residual = std::max(worst_residual, r);
  }

  // Generated samples: every pixel outside the paste regions is the destination's.
  int samples = 0;
  int leaks = 0;
  for (std::uint64_t seed = 1; seed <= 12; ++seed) {
    std::mt19937 layout(static_cast<std::uint32_t>(seed));
    std::uniform_real_distribution<double> ang(0.0, kPi);
    const std::vector<fx::Berry> bad_b{{{60, 60, 30, 20, ang(layout)}, true},
                                            {{150, 60, 25, 22, ang(layout)}, true}};
    const std::vector<fx::Berry> good_b{{{55, 62, 28, 21, ang(layout)}, false},
                                             {{145, 58, 26, 23, ang(layout)}, false}};
    const auto bad = fx::grape_image(200, 120, bad_b, seed * 2, "bad.png");
    const auto good = fx::grape_image(200, 120, good_b, seed * 2 + 1, "good.png");
    GenerationConfig cfg;
    cfg.n_syn = 2;
    cfg.one_image_per_paste = seed % 2 == 0;
    RandomStream rng_stream(seed);
    const SampleResult res = generate_sample(bad.image, bad.masks, good.image, good.masks, cfg,
                                             fx::fixture_params(), rng_stream);
    for (const SampleOutput& out : res.outputs) {
      ++samples;
      std::vector<std::uint8_t> inside(200 * 120, 0);
      for (const SegMask& r : out.regions) {
        r.for_each_pixel([&](int x, int y) { inside[static_cast<std::size_t>(y) * 200 + x] = 1; });
      }
      for (std::size_t i = 0; i < inside.size(); ++i) {
        if (inside[i]) continue;
        for (int c = 0; c < 3; ++c) {
          if (out.image.pixels()[i * 3 + c] != good.image.pixels()[i * 3 + c]) ++leaks;
        }
      }
      for (const SyntheticRecord& rec : out.records) {
        worst_residual = std::max(worst_residual, rec.blend_residual);
      }
    }
  }
  const bool pass = worst_diff <= 1e-4 && worst_residual <= 1e-6 && not_exact == 0 &&
                    leaks == 0 && samples > 0;
  return {pass, std::to_string(regions) + " regions, max |iter - dense| " +
                    fmt_double(worst_diff) + ", max residual " + fmt_double(worst_residual) +
                    ", src=dst mismatches " + std::to_string(not_exact) + ", " +
                    std::to_string(samples) + " samples with " + std::to_string(leaks) +
                    " outside-region changes"};
}

std::vector<LabeledPatch> tuner_corpus(int per_class, std::uint64_t seed) {
  return fx::patch_set(per_class, 64, seed);
}

Outcome tuner_separation() {
  const auto train = tuner_corpus(40, 11);
  const auto validation = tuner_corpus(20, 12);

  // The fixture tuple must separate the corpus perfectly.
  std::vector<std::int64_t> normal;
  std::vector<std::int64_t> anomalous;
  for (const auto& p : train) {
    (p.label == Label::Normal ? normal : anomalous)
        .push_back(patch_edge_count(p.image, fx::fixture_params()));
  }
  const double fixture_ba = fx::brute_best_balanced_accuracy(normal, anomalous);

  const auto t0 = Clock::now();
  TuneReport report = tune_report(train, GridSpec{}, worker_count());
  const TunedDced best = select_by_validation(report, validation, 25);
  const double elapsed = seconds_since(t0);

  std::vector<Label> preds;
  std::vector<Label> truths;
  for (const auto& p : validation) {
    preds.push_back(classify_baseline(p.image, best));
    truths.push_back(p.label);
  }
  const Metrics m = evaluate(preds, truths);
  const bool pass = fixture_ba == 1.0 && best.train_balanced_accuracy == 1.0 &&
                    best.val_balanced_accuracy == 1.0 && m.balanced_accuracy == 1.0 &&
                    elapsed < 300.0;
  return {pass, "fixture tuple BA " + fmt_double(fixture_ba) + ", train BA " +
                    fmt_double(best.train_balanced_accuracy) + ", val BA " +
                    fmt_double(best.val_balanced_accuracy.value_or(-1)) + ", " +
                    std::to_string(report.candidates.size()) + " candidates in " +
                    fmt_double(elapsed) + " s on " + std::to_string(worker_count()) +
                    " worker(s)"};
}

SegMask rect(int w, int h, int x0, int y0, int x1, int y1, const std::string& id) {
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(w) * h, 0);
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) bits[static_cast<std::size_t>(y) * w + x] = 1;
  }
  return *SegMask::from_bitmap(w, h, bits, id);
}

Outcome alignment() {
  int failures = 0;
  auto near = [&](double a, double b) {
    if (std::abs(a - b) > 1e-9) ++failures;
  };
  const SegMask e = fx::ellipse_mask(80, 80, {40, 40, 22, 9, 0.6}, "e");
  const AlignmentTransform id = compute_alignment(e, e);
  near(id.gamma, 1.0);
  near(id.phi, 0.0);
  near(id.linear_scale, 1.0);

  const AlignmentTransform quad =
      compute_alignment(rect(100, 100, 10, 10, 30, 20, "s"), rect(100, 100, 40, 40, 80, 60, "d"));
  near(quad.gamma, 4.0);
  near(quad.linear_scale, 2.0);

  const AlignmentTransform ortho =
      compute_alignment(rect(100, 100, 10, 10, 40, 20, "s"), rect(100, 100, 50, 30, 60, 60, "d"));
  near(ortho.phi, kPi / 2);
  near(std::abs(ortho.signed_rotation), kPi / 2);
  const int unit_failures = failures;

  std::mt19937 rng(909);
  std::uniform_real_distribution<double> ang(-kPi, kPi);
  std::uniform_real_distribution<double> major(10.0, 30.0);
  std::uniform_real_distribution<double> ratio(0.2, 0.7);
  double worst = 0.0;
  int pairs = 0;
  while (pairs < 500) {
    const double a1 = major(rng);
    const double a2 = major(rng);
    const SegMask s = fx::ellipse_mask(90, 90, {45, 45, a1, a1 * ratio(rng), ang(rng)}, "s");
    const SegMask d = fx::ellipse_mask(90, 90, {45, 45, a2, a2 * ratio(rng), ang(rng)}, "d");
    const auto ps = principal_axis(s);
    const auto pd = principal_axis(d);
    if (ps.degenerate || pd.degenerate) continue;
    ++pairs;
    const AlignmentTransform t = compute_alignment(s, d);
    const double c = std::cos(t.signed_rotation);
    const double sn = std::sin(t.signed_rotation);
    const Point2 r{c * ps.axis.x - sn * ps.axis.y, sn * ps.axis.x + c * ps.axis.y};
    worst = std::max(worst, std::abs(r.x * pd.axis.y - r.y * pd.axis.x));
    if (std::abs(t.signed_rotation) > kPi / 2 + 1e-12) ++failures;
  }
  return {failures == 0 && worst <= 1e-9,
          std::to_string(unit_failures) + " unit-case failures, " + std::to_string(pairs) +
              " random pairs, worst axis-line cross product " + fmt_double(worst)};
}

Outcome grid_count() {
  const GridSpec spec;
  const std::size_t got = enumerate_grid(spec).size();
  const std::size_t want = fx::exhaustive_grid_count(spec.threshold_values, spec.kernel_sizes);
  return {got == want && got > 0,
          "enumerated " + std::to_string(got) + ", exhaustive filter " + std::to_string(want)};
}

Outcome end_to_end_determinism() {
  const fs::path dir = fx::scratch_dir("acceptance_determinism");
  const auto corpus =
      fx::write_corpus(dir / "data", {.anomalous = 8, .normal = 6, .failing_pair = true});
  auto run = [&](const std::string& workers) {
    std::ostringstream out;
    std::ostringstream err;
    return run_cli({"generate", "--manifest", corpus.manifest.string(), "--dataset-root",
                    corpus.root.string(), "--mask-root", corpus.mask_root.string(), "--model",
                    corpus.model.string(), "--output-root", (dir / ("w" + workers)).string(),
                    "--seed", "17", "--n-syn", "2", "--workers", workers},
                   out, err);
  };
  const int c1 = run("1");
  const int c8 = run("8");
  const auto a = fx::snapshot_tree(dir / "w1");
  const auto b = fx::snapshot_tree(dir / "w8");
  const bool same = a == b;
  fs::remove_all(dir);
  return {c1 == kExitOk && c8 == kExitOk && same && a.size() > 3,
          std::to_string(a.size()) + " files, trees " + (same ? "identical" : "differ")};
}

Outcome manifest_arithmetic() {
  DatasetManifest real;
  for (int i = 0; i < 200; ++i) {
    real.entries.push_back({"real/n" + std::to_string(i) + ".png", Label::Normal,
                            "n" + std::to_string(i), std::nullopt});
  }
  for (int i = 0; i < 166; ++i) {
    real.entries.push_back({"real/a" + std::to_string(i) + ".png", Label::Anomalous,
                            "a" + std::to_string(i), std::nullopt});
  }
  DatasetManifest synthetic;
  for (int i = 0; i < 166; ++i) {
    synthetic.entries.push_back({"syn/a" + std::to_string(i) + "_syn.png", Label::Anomalous,
                                 "a" + std::to_string(i), std::nullopt});
  }
  auto synthetic_in = [](const DatasetManifest& m) {
    return static_cast<std::size_t>(std::count_if(m.entries.begin(), m.entries.end(),
                                                  [](const ManifestEntry& e) {
                                                    return e.path.rfind("syn/", 0) == 0;
                                                  }));
  };
  int errors = 0;
  std::size_t added_at_25 = 0;
  for (double pct : {10.0, 25.0, 50.0, 100.0}) {
    const std::size_t expected = static_cast<std::size_t>(std::floor(pct / 100.0 * 166 + 1e-9));
    const auto add = augment_manifest(real, synthetic, AugmentMode::Addition, pct, 1);
    if (add.entries.size() != real.entries.size() + expected || synthetic_in(add) != expected ||
        add.count(Label::Normal) != 200) {
      ++errors;
    }
    if (pct == 25.0) added_at_25 = synthetic_in(add);
    const auto sub = augment_manifest(real, synthetic, AugmentMode::Substitution, pct, 1);
    if (sub.entries.size() != real.entries.size() || synthetic_in(sub) != expected ||
        sub.count(Label::Anomalous) != 166 || sub.count(Label::Normal) != 200) {
      ++errors;
    }
  }
  return {errors == 0 && added_at_25 == 41,
          std::to_string(errors) + " size mismatches, addition at 25% added " +
              std::to_string(added_at_25)};
}

// Berries of 6-9k pixels, the region size the solver is designed for.
Outcome performance() {
  const fs::path dir = fx::scratch_dir("acceptance_perf");
  const auto corpus = fx::write_corpus(
      dir / "data",
      {.anomalous = 100, .normal = 20, .width = 512, .height = 512, .seed = 3, .berry_scale = 2.0});
  GenerationConfig cfg;
  cfg.seed = 5;
  const TunedDced tuned{fx::fixture_params(), 10.5, 1.0, std::nullopt};
  const auto t0 = Clock::now();
  const auto report = generate_dataset(corpus.entries, corpus.root, corpus.mask_root, tuned, cfg,
                                       dir / "out", worker_count());
  write_generation_report(dir / "out", report);
  const double elapsed = seconds_since(t0);
  fs::remove_all(dir);
  return {report.synthetic.entries.size() == 100 && elapsed < 60.0,
          std::to_string(report.synthetic.entries.size()) + " samples in " + fmt_double(elapsed) +
              " s on " + std::to_string(worker_count()) + " core(s)"};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"canny-oracle-equivalence", canny_oracle},
      {"threshold-monotonicity", threshold_monotonicity},
      {"poisson-solver", poisson_solver},
      {"tuner-fixture-separation", tuner_separation},
      {"alignment", alignment},
      {"grid-enumeration-count", grid_count},
      {"end-to-end-determinism", end_to_end_determinism},
      {"manifest-arithmetic", manifest_arithmetic},
      {"generation-performance", performance},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str());
    std::fflush(stdout);
    failed += !o.pass;
  }
  return failed == 0 ? 0 : 1;
}
