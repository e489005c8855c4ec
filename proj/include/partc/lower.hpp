#pragma once

#include "partc/ast.hpp"
#include "partc/ir.hpp"
#include "partc/policy.hpp"

namespace partc {

struct LoweringResult {
    ir::Module module;
    /// The <P, phi, alpha, pi> implied by pragmas, attributes and refinements.
    Policy policy;
    /// Every variable and statement the lowering created.
    ProgramIndex index;
};

/// Lowers a parsed program to IR with policy metadata on every global and
/// instruction. Statement ids are dense in lowering order starting at 1.
/// Throws Error with UndeclaredPartition, DuplicatePartition or SemanticError.
LoweringResult lower_to_ir(const ast::SourceProgram& program);

} // namespace partc
