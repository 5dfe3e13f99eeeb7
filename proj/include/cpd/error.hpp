#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace cpd {

enum class ErrorCode {
    InvalidArgument,
    ParseError,
    MissingColumn,
    NonEquidistantTimestamps,
    EmptyAfterCleaning,
    ZeroVariance,
    IndexOutOfRange,
    SegmentTooShort,
    DegenerateSegment,
    NoConvergence,
    SeriesTooShort,
    SeriesTooLong,
    MismatchedLength,
    DegenerateBelief,
};

inline std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::NonEquidistantTimestamps: return "NonEquidistantTimestamps";
    case ErrorCode::EmptyAfterCleaning: return "EmptyAfterCleaning";
    case ErrorCode::ZeroVariance: return "ZeroVariance";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::SegmentTooShort: return "SegmentTooShort";
    case ErrorCode::DegenerateSegment: return "DegenerateSegment";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::SeriesTooShort: return "SeriesTooShort";
    case ErrorCode::SeriesTooLong: return "SeriesTooLong";
    case ErrorCode::MismatchedLength: return "MismatchedLength";
    case ErrorCode::DegenerateBelief: return "DegenerateBelief";
    }
    return "Unknown";
}

/// Every failure raised by the library. `detail()` carries a code-specific
/// integer (offending row for NonEquidistantTimestamps, index for
/// IndexOutOfRange, ...), or 0 when there is nothing to report.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string &message, std::size_t detail = 0)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), detail_(detail) {}

    ErrorCode code() const noexcept { return code_; }
    std::size_t detail() const noexcept { return detail_; }

private:
    ErrorCode code_;
    std::size_t detail_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string &message, std::size_t detail = 0) {
    throw Error(code, message, detail);
}

inline void require(bool condition, ErrorCode code, const std::string &message) {
    if (!condition) {
        fail(code, message);
    }
}

} // namespace cpd
