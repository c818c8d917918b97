#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace provhunt {

enum class ErrorCode {
  MalformedRecord,
  IllegalEdge,
  TimeRegression,
  NotAFlowEvent,
  UnknownNode,
  EmptyCorpus,
  IoFailure,
  SchemaMismatch,
  MalformedPath,
  EmptyIndex,
  EmptyBenignKb,
  BackendUnavailable,
  Timeout,
  NoViableCluster,
  Config,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace provhunt
