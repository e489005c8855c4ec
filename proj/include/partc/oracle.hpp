#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string_view>

#include "partc/ir.hpp"
#include "partc/machine.hpp"
#include "partc/policy.hpp"

namespace partc {

enum class ViolationKind { Read, Write, Cfi, DoubleFree, InvalidFree, InvalidSize, OutOfBounds, OutOfMemory };

std::string_view to_string(ViolationKind kind);

struct Violation {
    StatementId stmt;
    ViolationKind kind = ViolationKind::Read;

    friend auto operator<=>(const Violation&, const Violation&) = default;
    friend bool operator==(const Violation&, const Violation&) = default;
};

/// The machine fault a violation must surface as.
FaultKind expected_fault(ViolationKind kind);

struct OracleResult {
    std::set<Violation> violations;
    bool halted = false;
    std::optional<uint64_t> return_value;
    uint64_t steps = 0;
};

/// Reference monitor: interprets the uninstrumented module over abstract
/// objects and checks every access against effective_rights. Execution
/// stops at the first violation.
OracleResult oracle_run(const ir::Module& module, const Policy& policy, std::span<const uint8_t> input,
                        std::string_view entry = "main", uint64_t step_limit = kDefaultStepLimit);

std::set<Violation> oracle_check(const ir::Module& module, const Policy& policy, std::span<const uint8_t> input,
                                 std::string_view entry = "main");

} // namespace partc
