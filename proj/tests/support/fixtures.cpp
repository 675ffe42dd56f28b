#include "fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>

#include <unistd.h>

#include "berrysmith/mask_codec.hpp"
#include "berrysmith/png_io.hpp"

namespace fs = std::filesystem;

namespace berrysmith::fx {

std::vector<std::uint8_t> rasterize(int width, int height, const Ellipse& e) {
  std::vector<std::uint8_t> bits(static_cast<std::size_t>(width) * height, 0);
  const double c = std::cos(e.angle);
  const double s = std::sin(e.angle);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double dx = x - e.cx;
      const double dy = y - e.cy;
      const double u = (dx * c + dy * s) / e.a;
      const double v = (-dx * s + dy * c) / e.b;
      if (u * u + v * v <= 1.0) bits[static_cast<std::size_t>(y) * width + x] = 1;
    }
  }
  return bits;
}

SegMask ellipse_mask(int width, int height, const Ellipse& e, std::string id,
                     std::string source) {
  auto m = SegMask::from_bitmap(width, height, rasterize(width, height, e), std::move(id),
                                std::move(source));
  if (!m) throw std::runtime_error("empty ellipse fixture");
  return *m;
}

namespace {

std::uint8_t clamp_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0)));
}

}  // namespace

FixtureImage grape_image(int width, int height, std::span<const Berry> berries,
                         std::uint64_t seed, const std::string& source) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> noise(-3, 3);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  ImageRgb img(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      img.at(x, y, 0) = clamp_byte(34 + noise(rng) + 6 * std::sin(x * 0.07));
      img.at(x, y, 1) = clamp_byte(62 + noise(rng) + 6 * std::cos(y * 0.05));
      img.at(x, y, 2) = clamp_byte(28 + noise(rng));
    }
  }

  FixtureImage out{img, MaskSet{source, width, height, MaskGenerator::Fixture, {}, {}}};
  for (std::size_t i = 0; i < berries.size(); ++i) {
    const Ellipse& e = berries[i].shape;
    const auto bits = rasterize(width, height, e);
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        if (!bits[static_cast<std::size_t>(y) * width + x]) continue;
        const double r = std::hypot((x - e.cx) / e.a, (y - e.cy) / e.a);
        const double shade = 1.0 - 0.25 * r * r;
        double rgb[3] = {150 * shade, 165 * shade, 70 * shade};
        if (berries[i].textured && unit(rng) < 0.18) {
          const double dark = 0.35 + 0.3 * unit(rng);
          rgb[0] = 110 * dark;
          rgb[1] = 80 * dark;
          rgb[2] = 40 * dark;
        }
        for (int c = 0; c < 3; ++c) out.image.at(x, y, c) = clamp_byte(rgb[c]);
      }
    }
    auto m = SegMask::from_bitmap(width, height, bits, "b" + std::to_string(i), source);
    if (!m) throw std::runtime_error("empty berry fixture");
    out.masks.masks.push_back(std::move(*m));
  }
  return out;
}

namespace {

ImageGray base_patch(int size, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> noise(-1, 1);
  std::uniform_real_distribution<double> slope(-0.2, 0.2);
  const double sx = slope(rng);
  const double sy = slope(rng);
  ImageGray p(size, size);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) p.at(x, y) = 120.0 + sx * x + sy * y + noise(rng);
  }
  return p;
}

}  // namespace

ImageGray flat_patch(int size, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return base_patch(size, rng);
}

ImageGray speckled_patch(int size, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ImageGray p = base_patch(size, rng);
  std::uniform_int_distribution<int> pos(2, size - 4);
  std::uniform_real_distribution<double> depth(40.0, 100.0);
  const int speckles = size * size / 48;
  for (int i = 0; i < speckles; ++i) {
    const int x = pos(rng);
    const int y = pos(rng);
    const double d = depth(rng);
    for (int dy = 0; dy < 2; ++dy) {
      for (int dx = 0; dx < 2; ++dx) p.at(x + dx, y + dy) = std::max(0.0, 120.0 - d);
    }
  }
  return p;
}

DcedParams fixture_params() { return DcedParams{3, {0.0, 25.0}, {25.0, 50.0}}; }

fs::path scratch_dir(const std::string& name) {
  const fs::path dir =
      fs::temp_directory_path() / ("berrysmith_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<std::pair<std::string, std::vector<std::uint8_t>>> snapshot_tree(const fs::path& root) {
  std::vector<std::pair<std::string, std::vector<std::uint8_t>>> out;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    out.emplace_back(fs::relative(entry.path(), root).generic_string(), read_bytes(entry.path()));
  }
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

std::vector<Berry> berry_layout(int width, int height, double s, bool textured,
                                std::mt19937_64& rng) {
  std::uniform_real_distribution<double> angle(0.0, 3.14159);
  std::uniform_real_distribution<double> jitter(-0.04, 0.04);
  std::vector<Berry> berries;
  berries.push_back({{width * 0.25, height * 0.5, (30 + 60 * jitter(rng)) * s,
                      (22 + 40 * jitter(rng)) * s, angle(rng)},
                     textured});
  berries.push_back({{width * 0.62, height * 0.5, (27 + 50 * jitter(rng)) * s,
                      (20 + 40 * jitter(rng)) * s, angle(rng)},
                     textured});
  berries.push_back({{width * 0.9, height * 0.22, 9 * s, 8 * s, angle(rng)}, false});
  berries.push_back({{width * 0.9, height * 0.78, 9 * s, 8 * s, angle(rng)}, false});
  return berries;
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream(path, std::ios::binary) << text;
}

}  // namespace

Corpus write_corpus(const fs::path& root, const CorpusOptions& o) {
  std::mt19937_64 rng(o.seed);
  Corpus c;
  c.root = root;
  c.manifest = root / "train_manifest.json";
  c.mask_root = root / "masks";
  c.model = root / "tuned_dced.json";

  const double scale = o.berry_scale > 0 ? o.berry_scale : o.height / 100.0;
  auto emit = [&](const std::string& rel, Label label, const std::vector<Berry>& berries,
                  const std::string& group) {
    const FixtureImage fx = grape_image(o.width, o.height, berries, rng(), rel);
    fs::create_directories((root / rel).parent_path());
    write_png(root / rel, fx.image);
    if (o.write_masks) {
      const fs::path mp = c.mask_root / (rel + ".masks.json");
      fs::create_directories(mp.parent_path());
      write_maskset(mp, fx.masks);
    }
    c.entries.entries.push_back({rel, label, group, std::nullopt});
  };

  char name[64];
  for (int i = 0; i < o.anomalous; ++i) {
    std::snprintf(name, sizeof name, "images/anomalous/a%03d.png", i);
    emit(name, Label::Anomalous, berry_layout(o.width, o.height, scale, true, rng),
         "field_a" + std::to_string(i % 5));
  }
  if (o.failing_pair) {
    const double s = scale;
    std::vector<Berry> thin{{{o.width * 0.5, o.height * 0.5, 60 * s, 5 * s, 0.3}, true},
                            {{o.width * 0.9, o.height * 0.2, 6 * s, 6 * s, 0.0}, false}};
    emit("images/anomalous/thin.png", Label::Anomalous, thin, "field_a0");
  }
  for (int i = 0; i < o.normal; ++i) {
    std::snprintf(name, sizeof name, "images/normal/n%03d.png", i);
    emit(name, Label::Normal, berry_layout(o.width, o.height, scale, false, rng),
         "field_n" + std::to_string(i % 5));
  }
  write_manifest(c.manifest, c.entries);
  write_text(c.model, tuned_dced_to_json(TunedDced{fixture_params(), 10.5, 1.0, std::nullopt}));
  return c;
}

std::vector<LabeledPatch> patch_set(int per_class, int size, std::uint64_t seed) {
  std::vector<LabeledPatch> out;
  for (int i = 0; i < per_class; ++i) {
    out.push_back({flat_patch(size, seed * 1000 + 2 * i), Label::Normal});
    out.push_back({speckled_patch(size, seed * 1000 + 2 * i + 1), Label::Anomalous});
  }
  return out;
}

}  // namespace berrysmith::fx
