#pragma once

#include <string>
#include <string_view>

#include "partc/ast.hpp"

namespace partc {

/// Parses mini-language source. A file holds one translation unit unless
/// `#unit <name>` lines split it into several. Throws Error with ParseError,
/// UnbalancedRefinement, DuplicatePragma or MissingPragma.
ast::SourceProgram parse_program(std::string_view text, std::string_view file = {});

/// Canonical source text; parse_program(print_program(p)) == p.
std::string print_program(const ast::SourceProgram& program);

} // namespace partc
