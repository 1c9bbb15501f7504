#include "quarry/error.hpp"

namespace quarry {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::NotFound: return "NotFound";
        case ErrorCode::DuplicateId: return "DuplicateId";
        case ErrorCode::MalformedRecord: return "MalformedRecord";
        case ErrorCode::OverlappingHighlight: return "OverlappingHighlight";
        case ErrorCode::KeywordConflict: return "KeywordConflict";
        case ErrorCode::SpanOutOfRange: return "SpanOutOfRange";
        case ErrorCode::ReservedCode: return "ReservedCode";
        case ErrorCode::IntegrityError: return "IntegrityError";
        case ErrorCode::InvalidPartition: return "InvalidPartition";
        case ErrorCode::InvalidMove: return "InvalidMove";
        case ErrorCode::InvalidLevel: return "InvalidLevel";
        case ErrorCode::EmptyDocument: return "EmptyDocument";
        case ErrorCode::SampleTooLarge: return "SampleTooLarge";
        case ErrorCode::OrderTooLarge: return "OrderTooLarge";
        case ErrorCode::Busy: return "Busy";
        case ErrorCode::Io: return "Io";
    }
    return "Unknown";
}

}  // namespace quarry
