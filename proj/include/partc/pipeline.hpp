#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "partc/ast.hpp"
#include "partc/instrument.hpp"
#include "partc/layout.hpp"
#include "partc/lower.hpp"
#include "partc/policy.hpp"

namespace partc {

struct SourceFile {
    std::string path;
    std::string text;
};

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& contents);
SourceFile load_source(const std::filesystem::path& path);

/// Parses every file and concatenates their translation units.
ast::SourceProgram parse_sources(std::span<const SourceFile> sources);

struct CheckResult {
    LoweringResult lowered;
    ValidationReport report;
};

/// Parse, lower and validate for the MPK backend. Front-end errors throw;
/// policy findings are returned in the report.
CheckResult check_sources(std::span<const SourceFile> sources);

struct BuildArtifact {
    ir::Module source_ir;
    InstrumentedModule instrumented;
    LayoutPlan layout;
    Policy policy;
    ProgramIndex index;
    KeyAssignment keys;
};

/// Full pipeline. Throws the first validation finding as an Error.
BuildArtifact build_program(std::span<const SourceFile> sources);
BuildArtifact build_program(std::string_view text, std::string_view file = {});

/// Deterministic JSON policy summary, including keys and switch-site count.
std::string policy_to_json(const Policy& policy, const KeyAssignment& keys, uint32_t switch_site_count);
void policy_from_json(std::string_view text, Policy& policy, KeyAssignment& keys);

inline constexpr const char* kModuleFile = "module.ir";
inline constexpr const char* kLayoutFile = "layout.json";
inline constexpr const char* kPolicyFile = "policy.json";

void write_artifact(const BuildArtifact& artifact, const std::filesystem::path& dir);

struct LoadedArtifact {
    ir::Module module;
    LayoutPlan layout;
    Policy policy;
    KeyAssignment keys;
};

LoadedArtifact load_artifact(const std::filesystem::path& dir);

} // namespace partc
