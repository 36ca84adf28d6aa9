#include "sift/error.hpp"

namespace sift {

std::string_view to_string(ErrorCode code) noexcept
{
    switch (code) {
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::MissingField: return "MissingField";
    case ErrorCode::MalformedUpload: return "MalformedUpload";
    case ErrorCode::EmbeddingsMissing: return "EmbeddingsMissing";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::ProviderUnavailable: return "ProviderUnavailable";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::TooFewPoints: return "TooFewPoints";
    case ErrorCode::KExceedsN: return "KExceedsN";
    case ErrorCode::UnknownArticle: return "UnknownArticle";
    case ErrorCode::SchemaViolation: return "SchemaViolation";
    case ErrorCode::NoObjectFound: return "NoObjectFound";
    case ErrorCode::NoClusters: return "NoClusters";
    case ErrorCode::AlreadyRead: return "AlreadyRead";
    case ErrorCode::NotIncluded: return "NotIncluded";
    case ErrorCode::DuplicateLeaf: return "DuplicateLeaf";
    case ErrorCode::DuplicateNode: return "DuplicateNode";
    case ErrorCode::UnknownNode: return "UnknownNode";
    case ErrorCode::CycleDetected: return "CycleDetected";
    case ErrorCode::InvalidNode: return "InvalidNode";
    case ErrorCode::NoEvidence: return "NoEvidence";
    case ErrorCode::EmptyGold: return "EmptyGold";
    case ErrorCode::UnknownSession: return "UnknownSession";
    case ErrorCode::UnknownAgent: return "UnknownAgent";
    case ErrorCode::PhaseViolation: return "PhaseViolation";
    case ErrorCode::NotReady: return "NotReady";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Io: return "Io";
    }
    return "Unknown";
}

Error::Error(ErrorCode code, std::string detail)
    : std::runtime_error(std::string(to_string(code)) + (detail.empty() ? "" : ": " + detail))
    , code_(code)
    , detail_(std::move(detail))
{
}

}  // namespace sift
