#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace quarry {

/// Machine-readable error categories shared by every module and the HTTP layer.
enum class ErrorCode {
    InvalidArgument,
    NotFound,
    DuplicateId,
    MalformedRecord,
    OverlappingHighlight,
    KeywordConflict,
    SpanOutOfRange,
    ReservedCode,
    IntegrityError,
    InvalidPartition,
    InvalidMove,
    InvalidLevel,
    EmptyDocument,
    SampleTooLarge,
    OrderTooLarge,
    Busy,
    Io,
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

}  // namespace quarry
