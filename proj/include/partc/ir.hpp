#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "partc/ast.hpp"
#include "partc/policy.hpp"
#include "partc/rights.hpp"

namespace partc::ir {

using ValueId = uint32_t;
using BlockId = uint32_t;

enum class Opcode {
    AllocStack,
    HeapAlloc,
    HeapFree,
    Load,
    Store,
    CallDirect,
    CallIndirect,
    TakeFnAddr,
    Phi,
    Branch,
    Ret,
    Const,
    Arith,
    GlobalAddr,
    Halt,
    ScopeEnter,
    ScopeExit,
    // runtime calls introduced by instrumentation
    SetPrivileges,
    SetPrivilegesDynamic,
    RestorePrivilegesDynamic,
    RegisterAtFn,
    PartitionAlloc,
    PartitionFree,
};

std::string_view to_string(Opcode op);
std::optional<Opcode> parse_opcode(std::string_view text);

enum class ArithOp { Add, Sub, Mul, Div, Rem, And, Or, Xor, Shl, Shr, Eq, Ne, Lt, Le, Gt, Ge, Neg, Not };

std::string_view to_string(ArithOp op);
std::optional<ArithOp> parse_arith(std::string_view text);
bool is_unary(ArithOp op);
/// Shared integer semantics: wrapping 64-bit arithmetic, signed comparisons,
/// division and remainder by zero yield zero, shift counts taken mod 64.
uint64_t eval_arith(ArithOp op, uint64_t lhs, uint64_t rhs);

struct PolicyMetadata {
    PartitionLabel partition_label = 0;
    AccessRights rights;
    std::optional<uint32_t> refinement_scope_id;

    /// "!partition(<label>,<rights>)[,!scope(<n>)]"
    [[nodiscard]] std::string to_string() const;

    friend bool operator==(const PolicyMetadata&, const PolicyMetadata&) = default;
};

enum class SwitchReason { CallEnter, CallExit, ScopeEnter, ScopeExit };

std::string_view to_string(SwitchReason reason);
std::optional<SwitchReason> parse_switch_reason(std::string_view text);

struct Instruction {
    ValueId id = 0;
    Opcode op = Opcode::Const;
    std::vector<ValueId> operands;
    /// Branch: [target] or [then, else]; Phi: incoming blocks parallel to operands.
    std::vector<BlockId> targets;
    /// Global, variable or function name.
    std::string symbol;
    int64_t imm = 0;
    ArithOp arith = ArithOp::Add;
    /// Load/Store width in bytes (1 or 8); AllocStack size.
    uint32_t width = 8;
    ast::TypeKind type = ast::TypeKind::Scalar;
    bool noreturn = false;
    StatementId stmt;
    std::optional<PolicyMetadata> md;
    // runtime calls
    PrivilegeVector vector;
    SwitchReason reason = SwitchReason::CallEnter;
    PartitionLabel from = 0;
    PartitionLabel to = 0;
    ProtectionKey key = 0;

    friend bool operator==(const Instruction&, const Instruction&) = default;
};

struct BasicBlock {
    BlockId id = 0;
    std::vector<Instruction> instructions;

    friend bool operator==(const BasicBlock&, const BasicBlock&) = default;
};

struct RefinementScope {
    uint32_t id = 0;
    /// 0 when the scope is outermost in its function.
    uint32_t parent = 0;
    StatementId stmt;
    PartitionLabel label = 0;
    AccessRights rights;

    friend bool operator==(const RefinementScope&, const RefinementScope&) = default;
};

struct Function {
    std::string name;
    std::vector<ValueId> params;
    bool noreturn = false;
    PartitionLabel home = 0;
    /// Header statement; pi at this statement is the function's rights vector.
    StatementId entry_stmt;
    std::vector<RefinementScope> scopes;
    std::vector<BasicBlock> blocks;
    ValueId next_value = 0;

    [[nodiscard]] const BasicBlock* find_block(BlockId id) const;
    [[nodiscard]] const RefinementScope* find_scope(uint32_t id) const;
    [[nodiscard]] const Instruction* find_instruction(ValueId id) const;

    friend bool operator==(const Function&, const Function&) = default;
};

struct Global {
    VariableId id;
    ast::TypeKind type = ast::TypeKind::Scalar;
    uint32_t size = 8;
    bool immutable = false;
    std::vector<uint8_t> init;
    PolicyMetadata md;

    friend bool operator==(const Global&, const Global&) = default;
};

struct Module {
    std::vector<PartitionId> partitions;
    std::vector<Global> globals;
    std::vector<Function> functions;

    [[nodiscard]] const Function* find_function(std::string_view name) const;
    [[nodiscard]] const Global* find_global(std::string_view name) const;

    friend bool operator==(const Module&, const Module&) = default;
};

/// A callsite or other instruction: function name plus value id.
struct InstrRef {
    std::string function;
    ValueId id = 0;

    friend bool operator==(const InstrRef&, const InstrRef&) = default;
    friend auto operator<=>(const InstrRef&, const InstrRef&) = default;
};

/// Line-oriented, byte-stable text form.
std::string dump(const Module& module);
/// Inverse of dump. Throws Error(FormatError).
Module parse_module(std::string_view text);

} // namespace partc::ir
