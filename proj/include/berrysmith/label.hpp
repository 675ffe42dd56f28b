#pragma once

#include <optional>
#include <string_view>

namespace berrysmith {

/// Patch class; anomalous is the positive class everywhere.
enum class Label { Normal, Anomalous };

inline const char* to_string(Label l) { return l == Label::Anomalous ? "anomalous" : "normal"; }

inline std::optional<Label> parse_label(std::string_view s) {
  if (s == "normal") return Label::Normal;
  if (s == "anomalous") return Label::Anomalous;
  return std::nullopt;
}

}  // namespace berrysmith
