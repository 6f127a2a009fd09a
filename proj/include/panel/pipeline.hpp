#pragma once

#include <chrono>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "panel/backend.hpp"
#include "panel/domain.hpp"
#include "panel/stage_types.hpp"

namespace panel::pipeline {

enum class Strategy { kCola, kDirect, kCot, kFeedback };

std::string_view to_string(Strategy s) noexcept;
Strategy parse_strategy(std::string_view s);

/// One agent call: the rendered prompt and what came back.
struct Transcript {
  std::string stage;  // analysis | debate | judgment | direct | cot | feedback
  std::string agent;  // role id, stance name or "judger"
  std::string system;
  std::string user;
  std::string response;
  bool from_cache = false;
  int retries = 0;
  std::chrono::milliseconds latency{0};
};

struct RunRecord {
  std::string instance_id;
  int run_index = 1;
  std::string task_name;
  Strategy strategy = Strategy::kCola;
  AblationVariant variant = AblationVariant::kFull;
  std::string backend;

  std::optional<Verdict> verdict;
  // Set instead of `verdict` when the judger answered but no parse path
  // matched; scored as an invalid prediction.
  std::optional<std::string> invalid_output;
  // Set when an agent call failed; the instance is not scored.
  std::optional<std::string> error;

  std::vector<Transcript> transcripts;  // execution order
  std::chrono::milliseconds elapsed{0};

  bool complete() const noexcept { return !error.has_value(); }
};

/// Shared state for the stage functions of one instance run.
struct StageContext {
  backend::ChatBackend& backend;
  AblationVariant variant = AblationVariant::kFull;
  int replica = 1;
  double temperature = 0.0;
  std::vector<Transcript>* transcripts = nullptr;  // appended when non-null
};

// Stage 1. One call per active analyst, none under drop_analysis_stage.
AnalysisBundle analyze(const Instance& instance, const TaskSpec& task, StageContext& ctx);
AnalysisBundle analyze(const Instance& instance, const TaskSpec& task,
                       backend::ChatBackend& backend,
                       AblationVariant variant = AblationVariant::kFull);

// Stage 2. One call per label in label-set order, none under drop_debate_stage.
std::vector<DebateArgument> debate(const Instance& instance, const AnalysisBundle& bundle,
                                   const TaskSpec& task, StageContext& ctx);

// Stage 3. A single judger call. With an empty `debates` under
// drop_debate_stage the judger sees the analyses instead.
Verdict conclude(const Instance& instance, const AnalysisBundle& bundle,
                 std::span<const DebateArgument> debates, const TaskSpec& task,
                 StageContext& ctx);

/// Maps judger text to a label. Paths, first match wins:
///   1. exact      the whole (trimmed) reply is one menu letter
///   2. structured a {"stance": ..., "explanation": ...} object; only when
///                 the task is in explanation mode
///   3. letter     first standalone uppercase menu letter, or a lowercase one
///                 as the very first token; a sentence-initial article "A"
///                 before a lowercase word does not count
///   4. label word earliest case-insensitive label name or display text
///   5. fallback   the task's fallback label (3-label tasks: neutral)
/// Throws Error(kUnparseableVerdict) when nothing matches and there is no
/// fallback.
Verdict parse_verdict(std::string_view raw, const TaskSpec& task);
Verdict parse_verdict(std::string_view raw, const TaskSpec& task, bool structured);

// Text after the last "Final answer:" marker, or `raw` when there is none.
std::string_view final_answer_segment(std::string_view raw) noexcept;

/// Full three-stage run honoring `variant`. Agent failures propagate as
/// StageError (stage, agent, instance id); an unparseable verdict is
/// recorded in `invalid_output` instead of throwing.
RunRecord classify(const Instance& instance, const TaskSpec& task,
                   backend::ChatBackend& backend,
                   AblationVariant variant = AblationVariant::kFull, int run_index = 1);

/// Single-call baselines. `explanation` is required for kFeedback.
RunRecord classify_single(const Instance& instance, const TaskSpec& task,
                          backend::ChatBackend& backend, Strategy strategy,
                          int run_index = 1,
                          std::optional<std::string_view> explanation = std::nullopt);

}  // namespace panel::pipeline
