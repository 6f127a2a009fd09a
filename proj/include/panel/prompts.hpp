#pragma once

#include <span>
#include <string>
#include <string_view>

#include "panel/domain.hpp"
#include "panel/stage_types.hpp"

// Renders every agent prompt from the task's text assets. All functions are
// pure: the same inputs give byte-identical output.
namespace panel::prompts {

struct PromptPair {
  std::string system;  // may be empty
  std::string user;

  friend bool operator==(const PromptPair&, const PromptPair&) = default;
};

PromptPair render_analyst(const RoleSpec& role, const Instance& instance);

// `variant` decides which analyses must be present. Missing ones raise
// kMissingAnalysis; a raw_only bundle renders the document alone.
PromptPair render_debater(const Instance& instance, const AnalysisBundle& bundle,
                          const StanceLabel& stance, const TaskSpec& task,
                          AblationVariant variant = AblationVariant::kFull);

// One argument per label is required (kArityMismatch otherwise); blocks are
// emitted in menu order whatever order `debates` arrives in.
PromptPair render_judger(const Instance& instance, std::span<const DebateArgument> debates,
                         const TaskSpec& task);

// Judger for the debate-stage ablation: analyses replace the argument blocks.
PromptPair render_judger_from_analyses(const Instance& instance,
                                       const AnalysisBundle& bundle, const TaskSpec& task);

PromptPair render_direct(const Instance& instance, const TaskSpec& task);
PromptPair render_cot(const Instance& instance, const TaskSpec& task);

// `explanation` must be non-empty (kInvalidArgument).
PromptPair render_explanation_feedback(const Instance& instance,
                                       std::string_view explanation,
                                       const TaskSpec& task);

}  // namespace panel::prompts
