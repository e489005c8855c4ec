#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace partc::testgen {

struct GeneratorOptions {
    uint32_t max_partitions = 4;
    uint32_t max_functions = 5;
    /// Top-level statements per function body.
    uint32_t max_statements = 3;
    uint32_t max_depth = 2;
    /// Allow write-only or otherwise invalid policies (for validator tests).
    bool allow_invalid_rights = false;
};

struct GeneratedProgram {
    uint64_t seed = 0;
    std::string source;
    std::vector<uint8_t> input;
    uint32_t partitions = 0;
};

/// Random well-formed program. Every run terminates; pointers never outlive
/// their objects except for immediately repeated frees; no out-of-bounds
/// indexing through live objects. Rights, attributes and refinements are
/// random so runs may violate the policy at any statement.
GeneratedProgram generate_program(uint64_t seed, const GeneratorOptions& options = {});

} // namespace partc::testgen
