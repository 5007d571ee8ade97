#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace netharm {

enum class ErrorCode {
  // graph construction and lookup
  DuplicateNode,
  DuplicateEdge,
  UnknownEndpoint,
  UnknownNode,
  HarmOutOfRange,
  SelfLoop,
  EmptyGraph,
  // path enumeration
  InvalidMMax,
  GraphTooLarge,
  BudgetExceeded,
  PathCountOverflow,
  // metrics
  EmptyMultiset,
  InvalidAggregator,
  AlphaOutOfRange,
  AlphaTooLarge,
  DivergentConfig,
  NoConvergence,
  InsufficientDepth,
  // what-if
  InvalidOverlay,
  SelfQuery,
  // ingest
  ParseError,
  ConstraintViolation,
  OutOfScale,
  UnknownGrade,
  DegenerateIndicator,
  MissingIndicator,
  UnmappedEntity,
  // front ends
  UnknownFixture,
  BindFailure,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Raised by the tabular readers. Lines and columns are 1-based.
class ParseError : public Error {
 public:
  ParseError(std::string source, std::size_t line, std::size_t column, std::string reason);

  const std::string& source() const noexcept { return source_; }
  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }
  const std::string& reason() const noexcept { return reason_; }

 private:
  std::string source_;
  std::size_t line_;
  std::size_t column_;
  std::string reason_;
};

}  // namespace netharm
