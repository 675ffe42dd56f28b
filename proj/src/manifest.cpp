#include "berrysmith/manifest.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "berrysmith/error.hpp"
#include "berrysmith/random.hpp"

namespace berrysmith {

void DatasetManifest::validate() const {
  std::set<std::string> seen;
  for (const ManifestEntry& e : entries) {
    if (e.path.empty()) throw DataError("manifest entry with an empty path");
    if (!seen.insert(e.path).second) throw DataError("duplicate manifest path '" + e.path + "'");
    if (e.fold && *e.fold < 0) throw DataError("negative fold for '" + e.path + "'");
  }
}

std::size_t DatasetManifest::count(Label label) const {
  return static_cast<std::size_t>(std::count_if(
      entries.begin(), entries.end(), [&](const ManifestEntry& e) { return e.label == label; }));
}

std::string manifest_to_json(const DatasetManifest& manifest) {
  nlohmann::ordered_json doc;
  doc["schema_version"] = kDatasetManifestSchemaVersion;
  auto& arr = doc["entries"] = nlohmann::ordered_json::array();
  for (const ManifestEntry& e : manifest.entries) {
    nlohmann::ordered_json j;
    j["path"] = e.path;
    j["label"] = to_string(e.label);
    j["source_image_group"] = e.source_image_group;
    j["fold"] = e.fold ? nlohmann::ordered_json(*e.fold) : nlohmann::ordered_json(nullptr);
    arr.push_back(std::move(j));
  }
  return doc.dump(2) + "\n";
}

DatasetManifest manifest_from_json(std::string_view text) {
  DatasetManifest m;
  try {
    const auto doc = nlohmann::json::parse(text.begin(), text.end());
    if (doc.at("schema_version").get<int>() != kDatasetManifestSchemaVersion) {
      throw DataError("dataset manifest: unsupported schema version");
    }
    for (const auto& j : doc.at("entries")) {
      ManifestEntry e;
      e.path = j.at("path").get<std::string>();
      const auto label = parse_label(j.at("label").get<std::string>());
      if (!label) throw DataError("dataset manifest: unknown label for '" + e.path + "'");
      e.label = *label;
      e.source_image_group = j.value("source_image_group", e.path);
      if (auto it = j.find("fold"); it != j.end() && !it->is_null()) e.fold = it->get<int>();
      m.entries.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("dataset manifest: ") + e.what());
  }
  m.validate();
  return m;
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open manifest " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return manifest_from_json(ss.str());
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
  manifest.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write manifest " + path.string());
  out << manifest_to_json(manifest);
}

DatasetManifest split_folds(const DatasetManifest& manifest, int k, std::uint64_t seed) {
  if (k < 2) throw InvalidArgument("fold count must be at least 2");
  manifest.validate();

  std::map<std::string, std::pair<std::size_t, std::size_t>> votes;  // normal, anomalous
  for (const ManifestEntry& e : manifest.entries) {
    auto& v = votes[e.source_image_group];
    (e.label == Label::Anomalous ? v.second : v.first) += 1;
  }
  std::vector<std::string> normal_groups, anomalous_groups;
  for (const auto& [group, v] : votes) {
    (v.second >= v.first ? anomalous_groups : normal_groups).push_back(group);
  }
  if (normal_groups.size() < static_cast<std::size_t>(k) ||
      anomalous_groups.size() < static_cast<std::size_t>(k)) {
    throw InvalidArgument("fold split needs at least " + std::to_string(k) +
                          " source image groups per class (normal: " +
                          std::to_string(normal_groups.size()) +
                          ", anomalous: " + std::to_string(anomalous_groups.size()) + ")");
  }

  RandomStream rng(derive_seed(seed, "split_folds"));
  std::map<std::string, int> fold_of;
  std::size_t next = 0;
  for (auto* groups : {&anomalous_groups, &normal_groups}) {
    rng.shuffle(*groups);
    for (const std::string& g : *groups) fold_of[g] = static_cast<int>(next++ % k);
  }

  DatasetManifest out = manifest;
  for (ManifestEntry& e : out.entries) e.fold = fold_of.at(e.source_image_group);
  return out;
}

const char* to_string(AugmentMode m) {
  return m == AugmentMode::Substitution ? "substitution" : "addition";
}

std::optional<AugmentMode> parse_augment_mode(std::string_view s) {
  if (s == "addition") return AugmentMode::Addition;
  if (s == "substitution") return AugmentMode::Substitution;
  return std::nullopt;
}

std::size_t percentage_count(double pct, std::size_t n) {
  return static_cast<std::size_t>(std::floor(pct * static_cast<double>(n) / 100.0 + 1e-9));
}

namespace {

/// `count` entries drawn without replacement, returned in path order.
std::vector<ManifestEntry> sample_entries(std::vector<ManifestEntry> pool, std::size_t count,
                                          RandomStream& rng) {
  std::sort(pool.begin(), pool.end(),
            [](const ManifestEntry& a, const ManifestEntry& b) { return a.path < b.path; });
  rng.shuffle(pool);
  pool.resize(count);
  std::sort(pool.begin(), pool.end(),
            [](const ManifestEntry& a, const ManifestEntry& b) { return a.path < b.path; });
  return pool;
}

}  // namespace

DatasetManifest augment_manifest(const DatasetManifest& real, const DatasetManifest& synthetic,
                                 AugmentMode mode, double pct, std::uint64_t seed) {
  if (!(pct > 0.0 && pct <= 100.0)) throw InvalidArgument("percentage must be in (0, 100]");
  real.validate();
  synthetic.validate();
  RandomStream rng(derive_seed(seed, std::string("augment:") + to_string(mode)));

  DatasetManifest out;
  std::size_t add_count = 0;
  if (mode == AugmentMode::Addition) {
    out = real;
    add_count = percentage_count(pct, synthetic.entries.size());
  } else {
    std::vector<ManifestEntry> real_anomalous;
    for (const ManifestEntry& e : real.entries) {
      if (e.label == Label::Anomalous) real_anomalous.push_back(e);
    }
    add_count = percentage_count(pct, real_anomalous.size());
    if (synthetic.entries.size() < add_count) {
      throw InvalidArgument("substitution needs " + std::to_string(add_count) +
                            " synthetic entries, pool has " +
                            std::to_string(synthetic.entries.size()));
    }
    std::set<std::string> removed;
    for (const ManifestEntry& e : sample_entries(real_anomalous, add_count, rng)) {
      removed.insert(e.path);
    }
    for (const ManifestEntry& e : real.entries) {
      if (!removed.contains(e.path)) out.entries.push_back(e);
    }
  }
  for (ManifestEntry e : sample_entries(synthetic.entries, add_count, rng)) {
    e.label = Label::Anomalous;
    out.entries.push_back(std::move(e));
  }
  try {
    out.validate();
  } catch (const DataError& e) {
    throw InvalidArgument(std::string("augmented manifest is invalid: ") + e.what());
  }
  return out;
}

}  // namespace berrysmith
