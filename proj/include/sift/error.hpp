#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sift {

enum class ErrorCode {
    EmptyCorpus,
    DuplicateId,
    MissingField,
    MalformedUpload,
    EmbeddingsMissing,
    DimensionMismatch,
    ProviderUnavailable,
    Timeout,
    TooFewPoints,
    KExceedsN,
    UnknownArticle,
    SchemaViolation,
    NoObjectFound,
    NoClusters,
    AlreadyRead,
    NotIncluded,
    DuplicateLeaf,
    DuplicateNode,
    UnknownNode,
    CycleDetected,
    InvalidNode,
    NoEvidence,
    EmptyGold,
    UnknownSession,
    UnknownAgent,
    PhaseViolation,
    NotReady,
    InvalidArgument,
    Io,
};

[[nodiscard]] std::string_view to_string(ErrorCode code) noexcept;

/// Every failure surfaced by the library. `detail` carries the offending
/// id, field or row so callers can report it without parsing `what()`.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, std::string detail);

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }
    [[nodiscard]] const std::string& detail() const noexcept { return detail_; }

private:
    ErrorCode code_;
    std::string detail_;
};

}  // namespace sift
