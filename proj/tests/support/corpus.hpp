#pragma once

#include <cstdint>
#include <string>

#include "generator.hpp"

namespace partc::testgen {

inline constexpr uint32_t kMaxCaseInstructions = 30;

enum class CaseStatus { Ran, Rejected, TooLarge };

struct CaseFeatures {
    bool direct_call = false;
    bool indirect_call = false;
    bool alloc = false;
    bool refinement = false;
    bool nested_refinement = false;
    /// A return that leaves one or more refinement scopes.
    bool early_return = false;
};

struct CaseOutcome {
    CaseStatus status = CaseStatus::Rejected;
    /// Machine and reference monitor agree on fault statement and kind, and
    /// on halt/return value when neither faults.
    bool agree = false;
    bool faulted = false;
    /// Machine fault kind when faulted.
    std::string fault_kind;
    bool restoration_ok = false;
    uint64_t restored_calls = 0;
    uint64_t restored_scopes = 0;
    CaseFeatures features;
    std::string detail;
};

/// Largest per-function instruction count of the uninstrumented IR.
uint32_t max_function_size(const std::string& source);

/// Builds the program, rejects it when a function exceeds the instruction
/// bound, then runs the instrumented module and the reference monitor on the
/// same input and compares them.
CaseOutcome run_case(const GeneratedProgram& program, uint32_t max_instructions = kMaxCaseInstructions);

} // namespace partc::testgen
