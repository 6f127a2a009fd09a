#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace panel {

enum class ErrorCode {
  kUnknownLabel,
  kUnknownOption,
  kUnboundPlaceholder,
  kTemplateSyntax,
  kInvalidTask,
  kInvalidArgument,
  kMissingAnalysis,
  kArityMismatch,
  kTransport,
  kAuth,
  kRateLimited,
  kMalformedResponse,
  kNoRuleMatched,
  kCacheCorrupt,
  kUnparseableVerdict,
  kSchemaMismatch,
  kEmptyDocument,
  kSampleTooLarge,
  kMissingClass,
  kHeterogeneousRuns,
  kDegenerateInput,
  kMissingExplanation,
  kIo,
  kInvalidConfig,
};

std::string_view to_string(ErrorCode code) noexcept;

// Every failure the library reports carries one of the codes above so that
// callers (and tests) can branch on the kind without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Raised by the pipeline when one agent call fails. Keeps the code of the
// underlying failure.
class StageError : public Error {
 public:
  StageError(ErrorCode code, std::string stage, std::string agent,
             std::string instance_id, const std::string& detail);

  const std::string& stage() const noexcept { return stage_; }
  const std::string& agent() const noexcept { return agent_; }
  const std::string& instance_id() const noexcept { return instance_id_; }

 private:
  std::string stage_;
  std::string agent_;
  std::string instance_id_;
};

}  // namespace panel
