#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "panel/domain.hpp"

namespace panel {

/// Output of the analysis stage: one text per active analyst, in role order.
/// `raw_only` marks the analysis-stage ablation, where the debaters see only
/// the original document.
struct AnalysisBundle {
  std::vector<std::pair<std::string, std::string>> analyses;
  bool raw_only = false;

  const std::string* find(std::string_view role_id) const noexcept {
    for (const auto& [id, text] : analyses) {
      if (id == role_id) return &text;
    }
    return nullptr;
  }
};

struct DebateArgument {
  StanceLabel stance;
  std::string argument;
};

enum class ParsePath {
  kExactLetter,
  kLetterPrefix,
  kLabelWord,
  kStructuredObject,
  kFallback,
};

std::string_view to_string(ParsePath p) noexcept;

struct Verdict {
  StanceLabel label;
  std::optional<std::string> explanation;
  ParsePath parse_path = ParsePath::kFallback;
  std::string raw;
};

}  // namespace panel
