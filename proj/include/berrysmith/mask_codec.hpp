#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "berrysmith/error.hpp"
#include "berrysmith/seg_mask.hpp"

namespace berrysmith {

inline constexpr int kMaskManifestSchemaVersion = 1;

/// Malformed mask manifest. `byte_offset` is set for syntax errors, `location`
/// (a JSON pointer) for structural ones.
class MaskCodecError : public DataError {
 public:
  MaskCodecError(std::optional<std::size_t> byte_offset, std::string location,
                 std::string reason);

  const std::optional<std::size_t>& byte_offset() const { return byte_offset_; }
  const std::string& location() const { return location_; }
  const std::string& reason() const { return reason_; }

 private:
  std::optional<std::size_t> byte_offset_;
  std::string location_;
  std::string reason_;
};

/// Canonical manifest bytes: fields in fixed order, masks sorted by id, compact
/// JSON followed by a single newline. Equal sets give identical bytes.
std::string encode_maskset(const MaskSet& set);

/// Parses and validates a manifest. Runs must be canonical (sorted, separated
/// by background) and each declared area must match its runs. Unknown
/// top-level keys are rejected. Throws MaskCodecError.
MaskSet decode_maskset(std::string_view bytes);

struct MaskValidation {
  bool valid = false;
  /// Decodes fine but the bytes differ from encode_maskset of the result.
  bool canonical = false;
  std::string message;
};

/// Full conformance check used by the masks-validate command.
MaskValidation validate_maskset_bytes(std::string_view bytes);

MaskSet read_maskset(const std::filesystem::path& path);
void write_maskset(const std::filesystem::path& path, const MaskSet& set);

}  // namespace berrysmith
