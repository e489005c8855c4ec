#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "partc/error.hpp"
#include "partc/policy.hpp"
#include "partc/rights.hpp"

namespace partc::ast {

/// `[[partition(label, rights)]]` on a declaration, or `[[privilege(label, rights)]]`
/// on code.
struct RightsAttr {
    PartitionLabel label = 0;
    AccessRights rights;
    SourceLoc loc;

    friend bool operator==(const RightsAttr&, const RightsAttr&) = default;
};

enum class TypeKind { Scalar, Pointer, Aggregate };

struct TypeSpec {
    TypeKind kind = TypeKind::Scalar;
    uint32_t size = 8;

    friend bool operator==(const TypeSpec&, const TypeSpec&) = default;
};

enum class VarScope { Global, Local };

enum class BinaryOp { Add, Sub, Mul, Div, Rem, And, Or, Xor, Shl, Shr, Eq, Ne, Lt, Le, Gt, Ge };
enum class UnaryOp { Neg, Not };

struct Expr {
    enum class Kind { IntLit, Name, AddrOf, Deref, Index, Call, Alloc, Binary, Unary, Conditional };

    Kind kind = Kind::IntLit;
    int64_t value = 0;
    std::string name;
    BinaryOp binary = BinaryOp::Add;
    UnaryOp unary = UnaryOp::Neg;
    /// Deref/Unary/Alloc: [operand]; Index: [base, index]; Binary: [lhs, rhs];
    /// Conditional: [cond, then, else]; Call: arguments.
    std::vector<Expr> operands;
    SourceLoc loc;

    friend bool operator==(const Expr&, const Expr&) = default;
};

struct VariableDecl {
    std::string name;
    VarScope scope = VarScope::Global;
    TypeSpec type;
    bool immutable = false;
    std::optional<RightsAttr> partition_attr;
    /// Globals: constant initializer bytes. Locals use Stmt::exprs instead.
    std::optional<std::vector<uint8_t>> init_bytes;
    std::optional<int64_t> init_value;
    SourceLoc loc;

    friend bool operator==(const VariableDecl&, const VariableDecl&) = default;
};

struct Stmt {
    enum class Kind { Let, Assign, Expr, If, While, Return, Free, Halt, Refine, Block };

    Kind kind = Kind::Expr;
    VariableDecl decl;
    /// Let: [init]?; Assign: [target, value]; Expr: [e]; If/While: [cond];
    /// Return: [value]?; Free: [pointer].
    std::vector<Expr> exprs;
    /// If/While/Refine/Block bodies.
    std::vector<Stmt> body;
    std::vector<Stmt> else_body;
    bool has_else = false;
    /// Refine: the single-statement form keeps its statement in body[0] with
    /// braced=false.
    bool braced = true;
    RightsAttr refinement;
    SourceLoc loc;

    friend bool operator==(const Stmt&, const Stmt&) = default;
};

struct FunctionDef {
    std::string name;
    std::vector<std::string> params;
    bool noreturn = false;
    std::vector<RightsAttr> refinements;
    std::vector<Stmt> body;
    SourceLoc loc;

    friend bool operator==(const FunctionDef&, const FunctionDef&) = default;
};

struct UnitPragma {
    PartitionLabel label = 0;
    AccessRights rights;
    SourceLoc loc;

    friend bool operator==(const UnitPragma&, const UnitPragma&) = default;
};

struct PartitionName {
    PartitionLabel label = 0;
    std::string name;
    SourceLoc loc;

    friend bool operator==(const PartitionName&, const PartitionName&) = default;
};

struct TranslationUnit {
    std::string name;
    UnitPragma pragma;
    std::vector<PartitionName> names;
    std::vector<VariableDecl> globals;
    std::vector<FunctionDef> functions;
    SourceLoc loc;

    friend bool operator==(const TranslationUnit&, const TranslationUnit&) = default;
};

struct SourceProgram {
    std::vector<TranslationUnit> units;

    friend bool operator==(const SourceProgram&, const SourceProgram&) = default;
};

} // namespace partc::ast
