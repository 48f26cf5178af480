#pragma once

#include <optional>
#include <stdexcept>
#include <string>

namespace mosaic {

enum class ErrorKind {
    EmptyTranscript,
    MalformedLine,
    NonMonotoneTimestamp,
    IndexOutOfRange,
    MalformedCodebook,
    BackendUnavailable,
    DimensionMismatch,
    StaleIndex,
    PromptTooLarge,
    UnparseableOutput,
    InvalidLabel,
    AmbiguousTag,
    ProvenanceViolation,
    EmptyGold,
    TranscriptMismatch,
    NotFound,
    InvalidArgument,
    IoError,
};

const char* error_kind_name(ErrorKind kind);

// Single exception type for the library; `kind()` carries the error class
// that HTTP status mapping and CLI exit messages are derived from.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message, std::optional<int> line = std::nullopt);

    ErrorKind kind() const { return kind_; }
    const char* kind_name() const { return error_kind_name(kind_); }
    std::optional<int> line() const { return line_; }
    const std::string& detail() const { return detail_; }

private:
    ErrorKind kind_;
    std::optional<int> line_;
    std::string detail_;
};

// Transport failures are the only class the graph retries.
inline bool is_transport_error(const Error& e) { return e.kind() == ErrorKind::BackendUnavailable; }

} // namespace mosaic
