#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace partc {

enum class ErrorCode {
    // front-end
    ParseError,
    UnbalancedRefinement,
    DuplicatePragma,
    MissingPragma,
    SemanticError,
    // policy
    UndeclaredPartition,
    DuplicatePartition,
    TotalityViolation,
    PrivilegeBelowDefault,
    UnrepresentableRights,
    KeyExhaustion,
    MultiplePartitions,
    UnknownPartition,
    // layout / runtime setup
    LayoutOverlap,
    ConflictingRegistration,
    // artifacts and files
    FormatError,
    IoError,
};

std::string_view to_string(ErrorCode code);

/// Whether an error belongs to the parse/format family (CLI exit 3) rather
/// than the policy/semantic family (CLI exit 2).
bool is_format_error(ErrorCode code);

struct SourceLoc {
    std::string file;
    uint32_t line = 0;
    uint32_t column = 0;

    [[nodiscard]] bool known() const { return line != 0; }
    [[nodiscard]] std::string to_string() const;

    // Locations never take part in structural comparison of syntax trees.
    friend bool operator==(const SourceLoc&, const SourceLoc&) { return true; }
};

class Error : public std::runtime_error {
  public:
    Error(ErrorCode code, std::string message, SourceLoc loc = {});

    [[nodiscard]] ErrorCode code() const { return code_; }
    [[nodiscard]] const SourceLoc& loc() const { return loc_; }
    [[nodiscard]] const std::string& message() const { return message_; }

  private:
    ErrorCode code_;
    SourceLoc loc_;
    std::string message_;
};

} // namespace partc
