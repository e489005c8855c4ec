#include "partc/policy.hpp"

#include <charconv>
#include <sstream>

namespace partc {

namespace {

std::string stmt_loc(StatementId s) { return "stmt:" + std::to_string(s.value); }
std::string part_loc(PartitionLabel p) { return "partition:" + std::to_string(p); }

std::optional<uint32_t> parse_u32(std::string_view text) {
    uint32_t value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) return std::nullopt;
    return value;
}

} // namespace

AccessRights PrivilegeVector::get(PartitionLabel label) const {
    auto it = entries_.find(label);
    return it == entries_.end() ? AccessRights::none() : it->second;
}

std::string PrivilegeVector::to_string() const {
    std::string out;
    for (const auto& [label, rights] : entries_) {
        if (!out.empty()) out += ',';
        out += std::to_string(label);
        out += ':';
        out += rights.to_string();
    }
    return out;
}

std::optional<PrivilegeVector> PrivilegeVector::parse(std::string_view text) {
    PrivilegeVector vec;
    while (!text.empty()) {
        auto comma = text.find(',');
        auto item = text.substr(0, comma);
        auto colon = item.find(':');
        if (colon == std::string_view::npos) return std::nullopt;
        auto label = parse_u32(item.substr(0, colon));
        auto rights = AccessRights::parse(item.substr(colon + 1));
        if (!label || !rights || vec.entries_.count(*label)) return std::nullopt;
        vec.entries_[*label] = *rights;
        if (comma == std::string_view::npos) break;
        text.remove_prefix(comma + 1);
        if (text.empty()) return std::nullopt;
    }
    return vec;
}

const PartitionId* Policy::find_partition(PartitionLabel label) const {
    for (const auto& p : partitions) {
        if (p.label == label) return &p;
    }
    return nullptr;
}

const PartitionId* Policy::find_partition(std::string_view name_or_label) const {
    for (const auto& p : partitions) {
        if (p.name == name_or_label) return &p;
    }
    if (auto label = parse_u32(name_or_label)) return find_partition(*label);
    return nullptr;
}

AccessRights Policy::default_rights(PartitionLabel label) const {
    auto it = defaults.find(label);
    return it == defaults.end() ? AccessRights::none() : it->second;
}

AccessRights Policy::privilege(StatementId statement, PartitionLabel label) const {
    if (auto it = overrides.find({statement, label}); it != overrides.end()) return it->second;
    if (auto it = statements.find(statement); it != statements.end() && it->second.home == label) {
        return it->second.home_rights;
    }
    return default_rights(label);
}

PrivilegeVector Policy::vector_at(StatementId statement) const {
    PrivilegeVector vec;
    for (const auto& p : partitions) vec.set(p.label, privilege(statement, p.label));
    return vec;
}

PrivilegeVector Policy::default_vector(PartitionLabel home) const {
    PrivilegeVector vec;
    for (const auto& p : partitions) {
        AccessRights rights = default_rights(p.label);
        if (p.label == home) {
            auto it = code_defaults.find(home);
            rights = it == code_defaults.end() ? AccessRights::read_write() : it->second;
        }
        vec.set(p.label, rights);
    }
    return vec;
}

std::optional<StatementId> Policy::function_entry(std::string_view function) const {
    auto it = functions.find(std::string(function));
    if (it == functions.end()) return std::nullopt;
    return it->second;
}

AccessRights effective_rights(StatementId statement, PartitionLabel partition, const Policy& policy,
                              bool immutable) {
    AccessRights rights = policy.privilege(statement, partition);
    return immutable ? rights.without_write() : rights;
}

std::string Finding::to_line() const {
    std::string out = severity == Severity::Error ? "error" : "warning";
    out += ' ';
    out += partc::to_string(code);
    out += ' ';
    out += location.empty() ? "-" : location;
    out += ' ';
    out += message;
    return out;
}

bool ValidationReport::ok() const {
    for (const auto& f : findings) {
        if (f.severity == Severity::Error) return false;
    }
    return true;
}

size_t ValidationReport::count(ErrorCode code) const {
    size_t n = 0;
    for (const auto& f : findings) n += f.code == code ? 1 : 0;
    return n;
}

std::string ValidationReport::to_string() const {
    std::string out;
    for (const auto& f : findings) {
        out += f.to_line();
        out += '\n';
    }
    return out;
}

void ValidationReport::add(ErrorCode code, std::string location, std::string message) {
    findings.push_back({Severity::Error, code, std::move(location), std::move(message)});
}

ValidationReport validate_policy(const Policy& policy, const ProgramIndex& index, Backend backend) {
    ValidationReport report;

    std::set<PartitionLabel> seen;
    for (const auto& p : policy.partitions) {
        if (!seen.insert(p.label).second) {
            report.add(ErrorCode::DuplicatePartition, part_loc(p.label), "partition label declared twice");
        }
    }

    for (const auto& p : policy.partitions) {
        if (!policy.defaults.count(p.label)) {
            report.add(ErrorCode::TotalityViolation, part_loc(p.label),
                       "default rights are undefined for partition '" + p.name + "'");
        }
    }
    for (const auto& [label, rights] : policy.defaults) {
        if (!policy.declares(label)) {
            report.add(ErrorCode::UndeclaredPartition, part_loc(label), "default rights name an undeclared partition");
        }
    }

    for (const auto& var : index.variables) {
        auto it = policy.data_assignment.find(var);
        if (it == policy.data_assignment.end()) {
            report.add(ErrorCode::TotalityViolation, "var:" + var.name, "variable is not assigned to a partition");
        } else if (!policy.declares(it->second)) {
            report.add(ErrorCode::UndeclaredPartition, "var:" + var.name,
                       "variable is assigned to undeclared partition " + std::to_string(it->second));
        }
    }

    for (const auto& s : index.statements) {
        auto it = policy.statements.find(s);
        if (it == policy.statements.end()) {
            report.add(ErrorCode::TotalityViolation, stmt_loc(s), "statement has no privilege assignment");
        } else if (!policy.declares(it->second.home)) {
            report.add(ErrorCode::UndeclaredPartition, stmt_loc(s),
                       "statement home is undeclared partition " + std::to_string(it->second.home));
        }
    }
    for (const auto& [key, rights] : policy.overrides) {
        if (!policy.declares(key.second)) {
            report.add(ErrorCode::UndeclaredPartition, stmt_loc(key.first),
                       "privilege refinement names undeclared partition " + std::to_string(key.second));
        }
    }

    for (const auto& s : index.statements) {
        for (const auto& p : policy.partitions) {
            AccessRights granted = policy.privilege(s, p.label);
            AccessRights floor = policy.default_rights(p.label);
            if (!rights_at_least(granted, floor)) {
                report.add(ErrorCode::PrivilegeBelowDefault, stmt_loc(s) + "/" + part_loc(p.label),
                           "privilege " + std::string(granted.to_string()) + " is below the partition default " +
                               std::string(floor.to_string()));
            }
        }
    }

    if (backend == Backend::Mpk) {
        const auto write_only = AccessRights::write();
        for (const auto& [label, rights] : policy.defaults) {
            if (rights == write_only) {
                report.add(ErrorCode::UnrepresentableRights, part_loc(label), "write-only default rights");
            }
        }
        for (const auto& [label, rights] : policy.code_defaults) {
            if (rights == write_only) {
                report.add(ErrorCode::UnrepresentableRights, part_loc(label), "write-only code rights");
            }
        }
        for (const auto& s : index.statements) {
            for (const auto& p : policy.partitions) {
                if (policy.privilege(s, p.label) == write_only) {
                    report.add(ErrorCode::UnrepresentableRights, stmt_loc(s) + "/" + part_loc(p.label),
                               "write-only privilege");
                }
            }
        }
        if (policy.partitions.size() > kMaxPartitions) {
            report.add(ErrorCode::KeyExhaustion, "policy",
                       std::to_string(policy.partitions.size()) + " partitions declared; at most " +
                           std::to_string(kMaxPartitions) + " protection keys are available");
        }
    }
    return report;
}

std::optional<ProtectionKey> KeyAssignment::key_of(PartitionLabel label) const {
    auto it = by_label_.find(label);
    if (it == by_label_.end()) return std::nullopt;
    return it->second;
}

std::optional<PartitionLabel> KeyAssignment::label_of(ProtectionKey key) const {
    auto it = by_key_.find(key);
    if (it == by_key_.end()) return std::nullopt;
    return it->second;
}

void KeyAssignment::assign(PartitionLabel label, ProtectionKey key) {
    if (key == kRuntimeKey || key >= kProtectionKeyCount) {
        throw Error(ErrorCode::KeyExhaustion, "protection key " + std::to_string(key) + " is not assignable");
    }
    if (by_label_.count(label) || by_key_.count(key)) {
        throw Error(ErrorCode::DuplicatePartition,
                    "partition " + std::to_string(label) + " or key " + std::to_string(key) + " assigned twice");
    }
    by_label_[label] = key;
    by_key_[key] = label;
}

KeyAssignment map_partitions_to_keys(std::span<const PartitionId> partitions) {
    if (partitions.size() > kMaxPartitions) {
        throw Error(ErrorCode::KeyExhaustion, std::to_string(partitions.size()) +
                                                  " partitions declared; at most " +
                                                  std::to_string(kMaxPartitions) + " protection keys are available");
    }
    KeyAssignment keys;
    ProtectionKey next = 1;
    for (const auto& p : partitions) keys.assign(p.label, next++);
    return keys;
}

} // namespace partc
