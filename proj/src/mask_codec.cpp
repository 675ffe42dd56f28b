#include "berrysmith/mask_codec.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <fstream>
#include <sstream>

namespace berrysmith {

using ordered_json = nlohmann::ordered_json;

MaskCodecError::MaskCodecError(std::optional<std::size_t> byte_offset, std::string location,
                               std::string reason)
    : DataError("mask manifest: " + reason +
                (byte_offset ? " at byte " + std::to_string(*byte_offset) : std::string{}) +
                (location.empty() ? std::string{} : " at " + location)),
      byte_offset_(byte_offset),
      location_(std::move(location)),
      reason_(std::move(reason)) {}

std::string encode_maskset(const MaskSet& set) {
  std::vector<const SegMask*> masks;
  masks.reserve(set.masks.size());
  for (const SegMask& m : set.masks) masks.push_back(&m);
  std::sort(masks.begin(), masks.end(),
            [](const SegMask* a, const SegMask* b) { return a->mask_id() < b->mask_id(); });

  ordered_json doc;
  doc["schema_version"] = kMaskManifestSchemaVersion;
  doc["source_image"] = set.source_image;
  doc["width"] = set.width;
  doc["height"] = set.height;
  doc["generator"] = to_string(set.generator);
  auto& arr = doc["masks"] = ordered_json::array();
  for (const SegMask* m : masks) {
    ordered_json entry;
    entry["mask_id"] = m->mask_id();
    entry["area"] = m->area();
    auto& runs = entry["runs"] = ordered_json::array();
    for (const Run& r : m->runs()) runs.push_back({r.start, r.length});
    arr.push_back(std::move(entry));
  }
  if (!set.metadata.empty()) {
    doc["metadata"] = ordered_json::parse(nlohmann::json::parse(set.metadata).dump());
  }
  return doc.dump() + "\n";
}

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& why) {
  throw MaskCodecError(std::nullopt, where, why);
}

const ordered_json& require(const ordered_json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end()) fail(where, std::string("missing field '") + key + "'");
  return *it;
}

std::int64_t require_int(const ordered_json& v, const std::string& where) {
  if (!v.is_number_integer()) fail(where, "expected an integer");
  return v.get<std::int64_t>();
}

}  // namespace

MaskSet decode_maskset(std::string_view bytes) {
  ordered_json doc;
  try {
    doc = ordered_json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::parse_error& e) {
    throw MaskCodecError(e.byte, "", "invalid JSON");
  }
  if (!doc.is_object()) fail("", "top level must be an object");

  static const char* const kKeys[] = {"schema_version", "source_image", "width",   "height",
                                      "generator",      "masks",        "metadata"};
  for (const auto& [key, _] : doc.items()) {
    if (std::find(std::begin(kKeys), std::end(kKeys), key) == std::end(kKeys)) {
      fail("/" + key, "unknown field");
    }
  }

  if (require_int(require(doc, "schema_version", ""), "/schema_version") !=
      kMaskManifestSchemaVersion) {
    fail("/schema_version", "unsupported schema version");
  }
  MaskSet set;
  const auto& src = require(doc, "source_image", "");
  if (!src.is_string()) fail("/source_image", "expected a string");
  set.source_image = src.get<std::string>();
  const auto width = require_int(require(doc, "width", ""), "/width");
  const auto height = require_int(require(doc, "height", ""), "/height");
  if (width < 1 || height < 1 || width > (1 << 20) || height > (1 << 20)) {
    fail("/width", "raster dimensions out of range");
  }
  set.width = static_cast<int>(width);
  set.height = static_cast<int>(height);
  const auto& gen = require(doc, "generator", "");
  if (!gen.is_string()) fail("/generator", "expected a string");
  auto parsed_gen = parse_mask_generator(gen.get<std::string>());
  if (!parsed_gen) fail("/generator", "unknown generator '" + gen.get<std::string>() + "'");
  set.generator = *parsed_gen;

  const auto& masks = require(doc, "masks", "");
  if (!masks.is_array()) fail("/masks", "expected an array");
  const std::int64_t total = width * height;
  for (std::size_t i = 0; i < masks.size(); ++i) {
    const std::string where = "/masks/" + std::to_string(i);
    const auto& m = masks[i];
    if (!m.is_object()) fail(where, "expected an object");
    const auto& id = require(m, "mask_id", where);
    if (!id.is_string()) fail(where + "/mask_id", "expected a string");
    const auto declared_area = require_int(require(m, "area", where), where + "/area");
    const auto& runs_json = require(m, "runs", where);
    if (!runs_json.is_array() || runs_json.empty()) fail(where + "/runs", "expected a non-empty array");
    std::vector<Run> runs;
    std::int64_t prev_end = -1;
    std::int64_t sum = 0;
    for (std::size_t k = 0; k < runs_json.size(); ++k) {
      const std::string rwhere = where + "/runs/" + std::to_string(k);
      const auto& r = runs_json[k];
      if (!r.is_array() || r.size() != 2) fail(rwhere, "run must be [start, length]");
      const auto start = require_int(r[0], rwhere + "/0");
      const auto length = require_int(r[1], rwhere + "/1");
      if (start < 0 || length < 1 || start + length > total) fail(rwhere, "run outside raster");
      if (start <= prev_end) fail(rwhere, "runs must be sorted and separated by background");
      prev_end = start + length;
      sum += length;
      runs.push_back({start, length});
    }
    if (sum != declared_area) fail(where + "/area", "area does not match runs");
    set.masks.emplace_back(set.width, set.height, std::move(runs), id.get<std::string>(),
                           set.source_image);
  }
  if (auto it = doc.find("metadata"); it != doc.end()) {
    if (!it->is_object()) fail("/metadata", "expected an object");
    set.metadata = nlohmann::json::parse(it->dump()).dump();
  }
  for (std::size_t i = 1; i < set.masks.size(); ++i) {
    if (!(set.masks[i - 1].mask_id() < set.masks[i].mask_id())) {
      fail("/masks/" + std::to_string(i) + "/mask_id", "mask ids must be unique and sorted");
    }
  }
  return set;
}

MaskValidation validate_maskset_bytes(std::string_view bytes) {
  MaskValidation v;
  try {
    const MaskSet set = decode_maskset(bytes);
    v.valid = true;
    v.canonical = encode_maskset(set) == bytes;
    v.message = v.canonical ? "ok" : "valid but not in canonical byte form";
  } catch (const MaskCodecError& e) {
    v.message = e.what();
  } catch (const InvalidArgument& e) {
    v.message = e.what();
  }
  return v;
}

MaskSet read_maskset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open mask manifest " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return decode_maskset(ss.str());
  } catch (const MaskCodecError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_maskset(const std::filesystem::path& path, const MaskSet& set) {
  set.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write mask manifest " + path.string());
  out << encode_maskset(set);
}

}  // namespace berrysmith
