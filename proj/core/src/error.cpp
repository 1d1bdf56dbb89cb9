#include "tep/error.hpp"

#include <fmt/format.h>

namespace tep {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::CycleDetected: return "CycleDetected";
    case ErrorCode::UnknownParent: return "UnknownParent";
    case ErrorCode::DuplicateNode: return "DuplicateNode";
    case ErrorCode::NoSink: return "NoSink";
    case ErrorCode::EmptyGraph: return "EmptyGraph";
    case ErrorCode::InvalidScale: return "InvalidScale";
    case ErrorCode::ContextOverflow: return "ContextOverflow";
    case ErrorCode::BackendFailure: return "BackendFailure";
    case ErrorCode::RemoteError: return "RemoteError";
    case ErrorCode::CacheMiss: return "CacheMiss";
    case ErrorCode::InvalidRequest: return "InvalidRequest";
    case ErrorCode::MalformedResponse: return "MalformedResponse";
    case ErrorCode::OutOfRangeRating: return "OutOfRangeRating";
    case ErrorCode::MalformedUpdate: return "MalformedUpdate";
    case ErrorCode::NoAttempts: return "NoAttempts";
    case ErrorCode::NonPositiveValue: return "NonPositiveValue";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::InvalidModel: return "InvalidModel";
    case ErrorCode::ParseFailure: return "ParseFailure";
    case ErrorCode::Overflow: return "Overflow";
    case ErrorCode::ConfigParse: return "ParseError";
    case ErrorCode::UnknownKey: return "UnknownKey";
    case ErrorCode::RangeError: return "RangeError";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::Io: return "IoError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message, std::string node_id)
    : std::runtime_error(fmt::format("{}: {}", to_string(code), message)),
      code_(code),
      node_id_(std::move(node_id)),
      detail_(message) {}

ContextOverflowError::ContextOverflowError(std::size_t requested, std::size_t limit,
                                           std::string node_id)
    : Error(ErrorCode::ContextOverflow,
            fmt::format("request of {} tokens exceeds context limit {}{}", requested, limit,
                        node_id.empty() ? std::string{} : " at node " + node_id),
            node_id),
      requested_(requested),
      limit_(limit) {}

RemoteError::RemoteError(int status, const std::string& message)
    : Error(ErrorCode::RemoteError, fmt::format("status {}: {}", status, message)),
      status_(status) {}

}  // namespace tep
