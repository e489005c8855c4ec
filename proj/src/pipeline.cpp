#include "partc/pipeline.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "partc/parser.hpp"

namespace partc {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot read '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path.string() + "'");
    out << contents;
    if (!out) throw Error(ErrorCode::IoError, "failed writing '" + path.string() + "'");
}

SourceFile load_source(const fs::path& path) { return {path.string(), read_file(path)}; }

ast::SourceProgram parse_sources(std::span<const SourceFile> sources) {
    ast::SourceProgram program;
    for (const auto& s : sources) {
        ast::SourceProgram part = parse_program(s.text, s.path);
        for (auto& u : part.units) program.units.push_back(std::move(u));
    }
    return program;
}

CheckResult check_sources(std::span<const SourceFile> sources) {
    CheckResult result;
    result.lowered = lower_to_ir(parse_sources(sources));
    result.report = validate_policy(result.lowered.policy, result.lowered.index, Backend::Mpk);
    return result;
}

BuildArtifact build_program(std::span<const SourceFile> sources) {
    CheckResult checked = check_sources(sources);
    if (!checked.report.ok()) {
        const Finding& first = checked.report.findings.front();
        throw Error(first.code, first.location + ": " + first.message);
    }
    BuildArtifact a;
    a.source_ir = std::move(checked.lowered.module);
    a.policy = std::move(checked.lowered.policy);
    a.index = std::move(checked.lowered.index);
    a.keys = map_partitions_to_keys(a.policy.partitions);
    a.instrumented = instrument_module(a.source_ir, a.policy, a.keys);
    a.layout = assign_sections(a.instrumented.ir, a.keys);
    check_layout(a.layout);
    return a;
}

BuildArtifact build_program(std::string_view text, std::string_view file) {
    SourceFile s{std::string(file), std::string(text)};
    return build_program(std::span<const SourceFile>(&s, 1));
}

std::string policy_to_json(const Policy& policy, const KeyAssignment& keys, uint32_t switch_site_count) {
    ordered_json j;
    j["switch_site_count"] = switch_site_count;
    j["partitions"] = ordered_json::array();
    for (const auto& p : policy.partitions) {
        ordered_json e;
        e["label"] = p.label;
        e["name"] = p.name;
        auto key = keys.key_of(p.label);
        e["key"] = key ? ordered_json(*key) : ordered_json(nullptr);
        e["default"] = std::string(policy.default_rights(p.label).to_string());
        auto code = policy.code_defaults.find(p.label);
        e["code"] = code != policy.code_defaults.end() ? ordered_json(std::string(code->second.to_string()))
                                                       : ordered_json(nullptr);
        j["partitions"].push_back(std::move(e));
    }
    j["variables"] = ordered_json::array();
    for (const auto& [var, label] : policy.data_assignment) {
        ordered_json e;
        e["name"] = var.name;
        e["partition"] = label;
        e["immutable"] = policy.immutable.count(var) != 0;
        j["variables"].push_back(std::move(e));
    }
    j["functions"] = ordered_json::array();
    for (const auto& [name, stmt] : policy.functions) {
        ordered_json e;
        e["name"] = name;
        e["entry_stmt"] = stmt.value;
        j["functions"].push_back(std::move(e));
    }
    j["statements"] = ordered_json::array();
    for (const auto& [stmt, ctx] : policy.statements) {
        ordered_json e;
        e["id"] = stmt.value;
        e["function"] = ctx.function;
        e["home"] = ctx.home;
        e["rights"] = std::string(ctx.home_rights.to_string());
        j["statements"].push_back(std::move(e));
    }
    j["overrides"] = ordered_json::array();
    for (const auto& [key, rights] : policy.overrides) {
        ordered_json e;
        e["stmt"] = key.first.value;
        e["partition"] = key.second;
        e["rights"] = std::string(rights.to_string());
        j["overrides"].push_back(std::move(e));
    }
    return j.dump(2) + "\n";
}

namespace {

AccessRights rights_field(const nlohmann::json& j, const char* key) {
    auto r = AccessRights::parse(j.at(key).get<std::string>());
    if (!r) throw Error(ErrorCode::FormatError, std::string("policy: bad rights in '") + key + "'");
    return *r;
}

} // namespace

void policy_from_json(std::string_view text, Policy& policy, KeyAssignment& keys) {
    policy = Policy{};
    keys = KeyAssignment{};
    try {
        const nlohmann::json j = nlohmann::json::parse(text);
        for (const auto& e : j.at("partitions")) {
            PartitionId p{e.at("label").get<PartitionLabel>(), e.at("name").get<std::string>()};
            policy.partitions.push_back(p);
            policy.defaults[p.label] = rights_field(e, "default");
            if (!e.at("code").is_null()) policy.code_defaults[p.label] = rights_field(e, "code");
            if (!e.at("key").is_null()) keys.assign(p.label, e.at("key").get<ProtectionKey>());
        }
        for (const auto& e : j.at("variables")) {
            VariableId v{e.at("name").get<std::string>()};
            policy.data_assignment[v] = e.at("partition").get<PartitionLabel>();
            if (e.at("immutable").get<bool>()) policy.immutable.insert(v);
        }
        for (const auto& e : j.at("functions")) {
            policy.functions[e.at("name").get<std::string>()] = StatementId{e.at("entry_stmt").get<uint32_t>()};
        }
        for (const auto& e : j.at("statements")) {
            StatementContext ctx{e.at("home").get<PartitionLabel>(), rights_field(e, "rights"),
                                 e.at("function").get<std::string>()};
            policy.statements[StatementId{e.at("id").get<uint32_t>()}] = ctx;
        }
        for (const auto& e : j.at("overrides")) {
            policy.overrides[{StatementId{e.at("stmt").get<uint32_t>()}, e.at("partition").get<PartitionLabel>()}] =
                rights_field(e, "rights");
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::FormatError, std::string("policy: ") + e.what());
    }
}

void write_artifact(const BuildArtifact& artifact, const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot create '" + dir.string() + "': " + ec.message());
    write_file(dir / kModuleFile, ir::dump(artifact.instrumented.ir));
    write_file(dir / kLayoutFile, emit_layout(artifact.layout));
    write_file(dir / kPolicyFile,
               policy_to_json(artifact.policy, artifact.keys, artifact.instrumented.switch_site_count));
}

LoadedArtifact load_artifact(const fs::path& dir) {
    LoadedArtifact a;
    a.module = ir::parse_module(read_file(dir / kModuleFile));
    a.layout = parse_layout(read_file(dir / kLayoutFile));
    policy_from_json(read_file(dir / kPolicyFile), a.policy, a.keys);
    return a;
}

} // namespace partc
