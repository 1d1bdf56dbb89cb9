#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tep {

enum class ErrorCode {
  // scg-core
  CycleDetected,
  UnknownParent,
  DuplicateNode,
  NoSink,
  EmptyGraph,
  InvalidScale,
  // backend-gateway
  ContextOverflow,
  BackendFailure,
  RemoteError,
  CacheMiss,
  InvalidRequest,
  // rubric-critic
  MalformedResponse,
  OutOfRangeRating,
  // tep-engine
  MalformedUpdate,
  // metrics-analysis
  NoAttempts,
  NonPositiveValue,
  InsufficientData,
  InvalidModel,
  // task-suite
  ParseFailure,
  Overflow,
  // harness-cli
  ConfigParse,
  UnknownKey,
  RangeError,
  SchemaMismatch,
  Io,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure raised by the library. `node_id` is set for errors that are
/// attributable to one graph node (ContextOverflow, BackendFailure, ...).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::string node_id = {});

  ErrorCode code() const noexcept { return code_; }
  const std::string& node_id() const noexcept { return node_id_; }
  /// Message without the code prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string node_id_;
  std::string detail_;
};

/// Raised when a request would exceed a backend's context window.
class ContextOverflowError : public Error {
 public:
  ContextOverflowError(std::size_t requested, std::size_t limit, std::string node_id = {});

  std::size_t requested_tokens() const noexcept { return requested_; }
  std::size_t limit_tokens() const noexcept { return limit_; }

 private:
  std::size_t requested_;
  std::size_t limit_;
};

class RemoteError : public Error {
 public:
  RemoteError(int status, const std::string& message);
  int status() const noexcept { return status_; }

 private:
  int status_;
};

}  // namespace tep
