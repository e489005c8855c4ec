#include "partc/error.hpp"

namespace partc {

std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::UnbalancedRefinement: return "UnbalancedRefinement";
    case ErrorCode::DuplicatePragma: return "DuplicatePragma";
    case ErrorCode::MissingPragma: return "MissingPragma";
    case ErrorCode::SemanticError: return "SemanticError";
    case ErrorCode::UndeclaredPartition: return "UndeclaredPartition";
    case ErrorCode::DuplicatePartition: return "DuplicatePartition";
    case ErrorCode::TotalityViolation: return "TotalityViolation";
    case ErrorCode::PrivilegeBelowDefault: return "PrivilegeBelowDefault";
    case ErrorCode::UnrepresentableRights: return "UnrepresentableRights";
    case ErrorCode::KeyExhaustion: return "KeyExhaustion";
    case ErrorCode::MultiplePartitions: return "MultiplePartitions";
    case ErrorCode::UnknownPartition: return "UnknownPartition";
    case ErrorCode::LayoutOverlap: return "LayoutOverlap";
    case ErrorCode::ConflictingRegistration: return "ConflictingRegistration";
    case ErrorCode::FormatError: return "FormatError";
    case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

bool is_format_error(ErrorCode code) {
    switch (code) {
    case ErrorCode::ParseError:
    case ErrorCode::UnbalancedRefinement:
    case ErrorCode::DuplicatePragma:
    case ErrorCode::MissingPragma:
    case ErrorCode::FormatError:
    case ErrorCode::IoError:
        return true;
    default:
        return false;
    }
}

std::string SourceLoc::to_string() const {
    std::string out = file.empty() ? "<input>" : file;
    if (line != 0) {
        out += ':' + std::to_string(line) + ':' + std::to_string(column);
    }
    return out;
}

Error::Error(ErrorCode code, std::string message, SourceLoc loc)
    : std::runtime_error(std::string(partc::to_string(code)) + ": " + message),
      code_(code), loc_(std::move(loc)), message_(std::move(message)) {}

} // namespace partc
