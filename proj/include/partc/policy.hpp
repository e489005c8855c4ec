#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "partc/error.hpp"
#include "partc/rights.hpp"

namespace partc {

using PartitionLabel = uint32_t;
using ProtectionKey = uint32_t;

inline constexpr ProtectionKey kRuntimeKey = 0;
inline constexpr uint32_t kProtectionKeyCount = 16;
inline constexpr uint32_t kMaxPartitions = kProtectionKeyCount - 1;

struct PartitionId {
    PartitionLabel label = 0;
    std::string name;

    friend bool operator==(const PartitionId&, const PartitionId&) = default;
};

struct VariableId {
    std::string name;

    friend auto operator<=>(const VariableId&, const VariableId&) = default;
};

struct StatementId {
    uint32_t value = 0;

    friend auto operator<=>(const StatementId&, const StatementId&) = default;
};

/// A full rights image over every declared partition, keyed by label.
class PrivilegeVector {
  public:
    PrivilegeVector() = default;
    explicit PrivilegeVector(std::map<PartitionLabel, AccessRights> entries)
        : entries_(std::move(entries)) {}

    [[nodiscard]] AccessRights get(PartitionLabel label) const;
    void set(PartitionLabel label, AccessRights rights) { entries_[label] = rights; }
    [[nodiscard]] const std::map<PartitionLabel, AccessRights>& entries() const { return entries_; }

    /// "0:rw,1:none,2:r"
    [[nodiscard]] std::string to_string() const;
    static std::optional<PrivilegeVector> parse(std::string_view text);

    friend bool operator==(const PrivilegeVector&, const PrivilegeVector&) = default;

  private:
    std::map<PartitionLabel, AccessRights> entries_;
};

/// Home partition of a statement and the rights its translation unit grants
/// there; the implicit value of pi before refinements are applied.
struct StatementContext {
    PartitionLabel home = 0;
    AccessRights home_rights = AccessRights::read_write();
    std::string function;

    friend bool operator==(const StatementContext&, const StatementContext&) = default;
};

/// The four-tuple <P, phi, alpha, pi>. pi is stored sparsely: a statement's
/// privilege on a partition is its override if one exists, else the home
/// rights on its own partition, else the partition default.
struct Policy {
    std::vector<PartitionId> partitions;
    std::map<PartitionLabel, AccessRights> defaults;
    std::map<VariableId, PartitionLabel> data_assignment;
    std::set<VariableId> immutable;
    std::map<StatementId, StatementContext> statements;
    std::map<std::pair<StatementId, PartitionLabel>, AccessRights> overrides;
    /// Rights held by unrefined code whose home is the partition.
    std::map<PartitionLabel, AccessRights> code_defaults;
    /// Function name to the statement id of its header.
    std::map<std::string, StatementId> functions;

    [[nodiscard]] const PartitionId* find_partition(PartitionLabel label) const;
    /// Accepts a declared display name or a decimal label.
    [[nodiscard]] const PartitionId* find_partition(std::string_view name_or_label) const;
    [[nodiscard]] bool declares(PartitionLabel label) const { return find_partition(label) != nullptr; }

    [[nodiscard]] AccessRights default_rights(PartitionLabel label) const;
    /// pi(s, p), materialized.
    [[nodiscard]] AccessRights privilege(StatementId statement, PartitionLabel label) const;
    [[nodiscard]] PrivilegeVector vector_at(StatementId statement) const;
    /// Rights of unrefined code running in the given partition.
    [[nodiscard]] PrivilegeVector default_vector(PartitionLabel home) const;
    [[nodiscard]] std::optional<StatementId> function_entry(std::string_view function) const;

    friend bool operator==(const Policy&, const Policy&) = default;
};

/// pi(s, p) restricted by immutability of the accessed datum.
AccessRights effective_rights(StatementId statement, PartitionLabel partition, const Policy& policy,
                              bool immutable);

struct ProgramIndex {
    std::set<VariableId> variables;
    std::set<StatementId> statements;
};

enum class Backend { Abstract, Mpk };

enum class Severity { Error, Warning };

struct Finding {
    Severity severity = Severity::Error;
    ErrorCode code = ErrorCode::TotalityViolation;
    std::string location;
    std::string message;

    /// "severity code location message"
    [[nodiscard]] std::string to_line() const;
};

struct ValidationReport {
    std::vector<Finding> findings;

    [[nodiscard]] bool ok() const;
    [[nodiscard]] size_t count(ErrorCode code) const;
    [[nodiscard]] std::string to_string() const;
    void add(ErrorCode code, std::string location, std::string message);
};

ValidationReport validate_policy(const Policy& policy, const ProgramIndex& index,
                                 Backend backend = Backend::Mpk);

/// Injective mapping from partitions to protection keys 1..15.
class KeyAssignment {
  public:
    KeyAssignment() = default;

    [[nodiscard]] std::optional<ProtectionKey> key_of(PartitionLabel label) const;
    [[nodiscard]] std::optional<PartitionLabel> label_of(ProtectionKey key) const;
    [[nodiscard]] size_t size() const { return by_label_.size(); }
    [[nodiscard]] const std::map<PartitionLabel, ProtectionKey>& entries() const { return by_label_; }

    void assign(PartitionLabel label, ProtectionKey key);

    friend bool operator==(const KeyAssignment&, const KeyAssignment&) = default;

  private:
    std::map<PartitionLabel, ProtectionKey> by_label_;
    std::map<ProtectionKey, PartitionLabel> by_key_;
};

/// Keys 1, 2, 3, ... in declaration order. Throws KeyExhaustion beyond 15
/// partitions and DuplicatePartition on repeated labels.
KeyAssignment map_partitions_to_keys(std::span<const PartitionId> partitions);

} // namespace partc
