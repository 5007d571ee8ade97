#include "netharm/errors.hpp"

namespace netharm {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::DuplicateNode: return "DuplicateNode";
    case ErrorCode::DuplicateEdge: return "DuplicateEdge";
    case ErrorCode::UnknownEndpoint: return "UnknownEndpoint";
    case ErrorCode::UnknownNode: return "UnknownNode";
    case ErrorCode::HarmOutOfRange: return "HarmOutOfRange";
    case ErrorCode::SelfLoop: return "SelfLoop";
    case ErrorCode::EmptyGraph: return "EmptyGraph";
    case ErrorCode::InvalidMMax: return "InvalidMMax";
    case ErrorCode::GraphTooLarge: return "GraphTooLarge";
    case ErrorCode::BudgetExceeded: return "BudgetExceeded";
    case ErrorCode::PathCountOverflow: return "PathCountOverflow";
    case ErrorCode::EmptyMultiset: return "EmptyMultiset";
    case ErrorCode::InvalidAggregator: return "InvalidAggregator";
    case ErrorCode::AlphaOutOfRange: return "AlphaOutOfRange";
    case ErrorCode::AlphaTooLarge: return "AlphaTooLarge";
    case ErrorCode::DivergentConfig: return "DivergentConfig";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::InsufficientDepth: return "InsufficientDepth";
    case ErrorCode::InvalidOverlay: return "InvalidOverlay";
    case ErrorCode::SelfQuery: return "SelfQuery";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ConstraintViolation: return "ConstraintViolation";
    case ErrorCode::OutOfScale: return "OutOfScale";
    case ErrorCode::UnknownGrade: return "UnknownGrade";
    case ErrorCode::DegenerateIndicator: return "DegenerateIndicator";
    case ErrorCode::MissingIndicator: return "MissingIndicator";
    case ErrorCode::UnmappedEntity: return "UnmappedEntity";
    case ErrorCode::UnknownFixture: return "UnknownFixture";
    case ErrorCode::BindFailure: return "BindFailure";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(message), code_(code) {}

namespace {
std::string format_parse_error(const std::string& source, std::size_t line, std::size_t column,
                               const std::string& reason) {
  return source + ":" + std::to_string(line) + ":" + std::to_string(column) + ": " + reason;
}
}  // namespace

ParseError::ParseError(std::string source, std::size_t line, std::size_t column, std::string reason)
    : Error(ErrorCode::ParseError, format_parse_error(source, line, column, reason)),
      source_(std::move(source)),
      line_(line),
      column_(column),
      reason_(std::move(reason)) {}

}  // namespace netharm
