#include "panel/error.hpp"

namespace panel {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kUnknownLabel: return "UnknownLabel";
    case ErrorCode::kUnknownOption: return "UnknownOption";
    case ErrorCode::kUnboundPlaceholder: return "UnboundPlaceholder";
    case ErrorCode::kTemplateSyntax: return "TemplateSyntax";
    case ErrorCode::kInvalidTask: return "InvalidTask";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kMissingAnalysis: return "MissingAnalysis";
    case ErrorCode::kArityMismatch: return "ArityMismatch";
    case ErrorCode::kTransport: return "Transport";
    case ErrorCode::kAuth: return "Auth";
    case ErrorCode::kRateLimited: return "RateLimited";
    case ErrorCode::kMalformedResponse: return "MalformedResponse";
    case ErrorCode::kNoRuleMatched: return "NoRuleMatched";
    case ErrorCode::kCacheCorrupt: return "CacheCorrupt";
    case ErrorCode::kUnparseableVerdict: return "UnparseableVerdict";
    case ErrorCode::kSchemaMismatch: return "SchemaMismatch";
    case ErrorCode::kEmptyDocument: return "EmptyDocument";
    case ErrorCode::kSampleTooLarge: return "SampleTooLarge";
    case ErrorCode::kMissingClass: return "MissingClass";
    case ErrorCode::kHeterogeneousRuns: return "HeterogeneousRuns";
    case ErrorCode::kDegenerateInput: return "DegenerateInput";
    case ErrorCode::kMissingExplanation: return "MissingExplanation";
    case ErrorCode::kIo: return "IoFailure";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

namespace {

std::string stage_message(std::string_view stage, std::string_view agent,
                          std::string_view instance_id, const std::string& detail) {
  std::string msg = "[";
  msg += stage;
  if (!agent.empty()) {
    msg += '/';
    msg += agent;
  }
  msg += "] instance ";
  msg += instance_id;
  msg += ": ";
  msg += detail;
  return msg;
}

}  // namespace

StageError::StageError(ErrorCode code, std::string stage, std::string agent,
                       std::string instance_id, const std::string& detail)
    : Error(code, stage_message(stage, agent, instance_id, detail)),
      stage_(std::move(stage)),
      agent_(std::move(agent)),
      instance_id_(std::move(instance_id)) {}

}  // namespace panel
