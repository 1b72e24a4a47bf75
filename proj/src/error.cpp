#include "amr/error.hpp"

namespace amr {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::UnknownRegion: return "UnknownRegion";
    case ErrorCode::UnknownIncomeGroup: return "UnknownIncomeGroup";
    case ErrorCode::OutOfRangePercentage: return "OutOfRangePercentage";
    case ErrorCode::NegativeConsumption: return "NegativeConsumption";
    case ErrorCode::DuplicateKey: return "DuplicateKey";
    case ErrorCode::MalformedRow: return "MalformedRow";
    case ErrorCode::BadHeader: return "BadHeader";
    case ErrorCode::EmptyConfig: return "EmptyConfig";
    case ErrorCode::NoObservedValues: return "NoObservedValues";
    case ErrorCode::EmptyTraining: return "EmptyTraining";
    case ErrorCode::EmptyPartition: return "EmptyPartition";
    case ErrorCode::InvalidSplit: return "InvalidSplit";
    case ErrorCode::DegenerateDesign: return "DegenerateDesign";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::ColumnMismatch: return "ColumnMismatch";
    case ErrorCode::UnsupportedModel: return "UnsupportedModel";
    case ErrorCode::CorruptModel: return "CorruptModel";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::ZeroNaiveMae: return "ZeroNaiveMae";
    case ErrorCode::MissingModel: return "MissingModel";
    case ErrorCode::IncompleteReport: return "IncompleteReport";
    case ErrorCode::EmptyDocument: return "EmptyDocument";
    case ErrorCode::EmptyText: return "EmptyText";
    case ErrorCode::EmbedderMismatch: return "EmbedderMismatch";
    case ErrorCode::EmptyIndex: return "EmptyIndex";
    case ErrorCode::DuplicateLabel: return "DuplicateLabel";
    case ErrorCode::CorruptIndex: return "CorruptIndex";
    case ErrorCode::BadCorpus: return "BadCorpus";
    case ErrorCode::EmbedderFailure: return "EmbedderFailure";
    case ErrorCode::NoHits: return "NoHits";
    case ErrorCode::EndpointUnreachable: return "EndpointUnreachable";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::MalformedResponse: return "MalformedResponse";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::ArtifactMissing: return "ArtifactMissing";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(message), code_(code) {}

ParseError::ParseError(ErrorCode code, std::size_t line, const std::string& message)
    : Error(code, "line " + std::to_string(line) + ": " + message), line_(line) {}

}  // namespace amr
