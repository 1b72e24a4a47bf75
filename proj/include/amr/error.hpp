#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace amr {

enum class ErrorCode {
  // data_model
  UnknownRegion,
  UnknownIncomeGroup,
  OutOfRangePercentage,
  NegativeConsumption,
  DuplicateKey,
  MalformedRow,
  BadHeader,
  EmptyConfig,
  // feature_pipeline
  NoObservedValues,
  EmptyTraining,
  EmptyPartition,
  InvalidSplit,
  // model_zoo
  DegenerateDesign,
  InvalidSpec,
  NonFiniteLoss,
  ColumnMismatch,
  UnsupportedModel,
  CorruptModel,
  // evaluation
  LengthMismatch,
  ZeroNaiveMae,
  MissingModel,
  IncompleteReport,
  // rag_store
  EmptyDocument,
  EmptyText,
  EmbedderMismatch,
  EmptyIndex,
  DuplicateLabel,
  CorruptIndex,
  BadCorpus,
  EmbedderFailure,
  // policy_assistant
  NoHits,
  EndpointUnreachable,
  Timeout,
  MalformedResponse,
  // service_cli
  ConfigInvalid,
  ArtifactMissing,
  Io,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Base exception for every recoverable failure in the toolkit. The code is
/// stable and printed verbatim by the CLI and the HTTP service.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Error raised while parsing a CSV export; carries the 1-based line number.
class ParseError : public Error {
 public:
  ParseError(ErrorCode code, std::size_t line, const std::string& message);

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace amr
