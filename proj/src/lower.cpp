#include "partc/lower.hpp"

#include <functional>
#include <set>

namespace partc {

namespace {

using namespace ast;
using ir::BlockId;
using ir::Instruction;
using ir::Opcode;
using ir::ValueId;

struct Refinement {
    uint32_t scope_id = 0; // 0 for function-level refinements
    PartitionLabel label = 0;
    AccessRights rights;
};

struct LocalVar {
    VariableId id;
    ValueId slot = 0;
    TypeSpec type;
};

struct UnitInfo {
    PartitionLabel home = 0;
    AccessRights rights;
};

class ModuleLowering;

class FunctionLowering {
  public:
    FunctionLowering(ModuleLowering& module, const FunctionDef& def, const UnitInfo& unit)
        : m_(module), def_(def), unit_(unit) {}

    ir::Function run();

  private:
    // -- emission --
    Instruction make(Opcode op) {
        Instruction in;
        in.op = op;
        in.id = fn_.next_value++;
        in.stmt = stmt_;
        in.md = current_md();
        return in;
    }
    ValueId emit(Instruction in) {
        ValueId id = in.id;
        block(current_).instructions.push_back(std::move(in));
        return id;
    }
    ValueId emit_const(int64_t v) {
        Instruction in = make(Opcode::Const);
        in.imm = v;
        return emit(std::move(in));
    }
    ValueId emit_arith(ir::ArithOp op, ValueId a, std::optional<ValueId> b = std::nullopt) {
        Instruction in = make(Opcode::Arith);
        in.arith = op;
        in.operands.push_back(a);
        if (b) in.operands.push_back(*b);
        return emit(std::move(in));
    }
    ValueId emit_load(ValueId addr, uint32_t width) {
        Instruction in = make(Opcode::Load);
        in.operands = {addr};
        in.width = width;
        return emit(std::move(in));
    }
    void emit_store(ValueId addr, ValueId value, uint32_t width) {
        Instruction in = make(Opcode::Store);
        in.operands = {addr, value};
        in.width = width;
        emit(std::move(in));
    }
    void emit_branch(BlockId target) {
        Instruction in = make(Opcode::Branch);
        in.targets = {target};
        emit(std::move(in));
    }
    void emit_cond_branch(ValueId cond, BlockId then_b, BlockId else_b) {
        Instruction in = make(Opcode::Branch);
        in.operands = {cond};
        in.targets = {then_b, else_b};
        emit(std::move(in));
    }
    BlockId new_block() {
        ir::BasicBlock b;
        b.id = next_block_++;
        fn_.blocks.push_back(std::move(b));
        return fn_.blocks.back().id;
    }
    ir::BasicBlock& block(BlockId id) {
        for (auto& b : fn_.blocks) {
            if (b.id == id) return b;
        }
        throw Error(ErrorCode::SemanticError, "internal: missing block");
    }

    std::optional<ir::PolicyMetadata> current_md() const {
        for (auto it = refinements_.rbegin(); it != refinements_.rend(); ++it) {
            if (it->scope_id != 0) return ir::PolicyMetadata{it->label, it->rights, it->scope_id};
        }
        return ir::PolicyMetadata{unit_.home, unit_.rights, std::nullopt};
    }

    // -- statements --
    void begin_statement(const SourceLoc& loc);
    void lower_block(const std::vector<Stmt>& body);
    void lower_stmt(const Stmt& st);

    // -- expressions --
    ValueId rvalue(const Expr& e);
    std::pair<ValueId, uint32_t> lvalue(const Expr& e);
    ValueId call(const Expr& e);

    [[noreturn]] void semantic(const std::string& msg, const SourceLoc& loc) const {
        throw Error(ErrorCode::SemanticError, msg, loc);
    }

    const LocalVar* find_local(const std::string& name) const {
        for (auto it = locals_.rbegin(); it != locals_.rend(); ++it) {
            if (auto found = it->find(name); found != it->end()) return &found->second;
        }
        return nullptr;
    }
    std::optional<ValueId> find_param(const std::string& name) const {
        for (size_t i = 0; i < def_.params.size(); ++i) {
            if (def_.params[i] == name) return fn_.params[i];
        }
        return std::nullopt;
    }

    ModuleLowering& m_;
    const FunctionDef& def_;
    UnitInfo unit_;
    ir::Function fn_;
    BlockId current_ = 0;
    BlockId next_block_ = 0;
    StatementId stmt_;
    std::vector<Refinement> refinements_;
    std::vector<std::map<std::string, LocalVar>> locals_;
    std::vector<Instruction> allocas_;
    std::map<std::string, int> local_name_uses_;
};

class ModuleLowering {
  public:
    LoweringResult run(const SourceProgram& program);

    StatementId next_statement() { return StatementId{++last_stmt_}; }
    uint32_t next_scope() { return ++last_scope_; }

    bool is_function(const std::string& name) const { return functions_.count(name) != 0; }
    const FunctionDef* function(const std::string& name) const {
        auto it = functions_.find(name);
        return it == functions_.end() ? nullptr : it->second;
    }
    const ir::Global* global(const std::string& name) const {
        auto it = global_index_.find(name);
        return it == global_index_.end() ? nullptr : &result_.module.globals[it->second];
    }

    void require_declared(PartitionLabel label, const SourceLoc& loc) const {
        if (!result_.policy.declares(label)) {
            throw Error(ErrorCode::UndeclaredPartition, "partition " + std::to_string(label) + " is not declared",
                        loc);
        }
    }

    void record_statement(StatementId s, const UnitInfo& unit, const std::string& function,
                          const std::vector<Refinement>& refinements) {
        Policy& policy = result_.policy;
        policy.statements[s] = StatementContext{unit.home, unit.rights, function};
        result_.index.statements.insert(s);
        std::map<PartitionLabel, AccessRights> raised;
        for (const auto& r : refinements) {
            auto it = raised.find(r.label);
            AccessRights base = it != raised.end() ? it->second : policy.privilege(s, r.label);
            raised[r.label] = base.join(r.rights);
        }
        for (const auto& [label, rights] : raised) {
            if (rights != policy.privilege(s, label)) policy.overrides[{s, label}] = rights;
        }
    }

    void record_local(const VariableId& id, PartitionLabel label) {
        result_.policy.data_assignment[id] = label;
        result_.index.variables.insert(id);
    }

  private:
    void declare_partition(PartitionLabel label, const std::string* name, const SourceLoc& loc);

    LoweringResult result_;
    uint32_t last_stmt_ = 0;
    uint32_t last_scope_ = 0;
    std::map<std::string, const FunctionDef*> functions_;
    std::map<std::string, size_t> global_index_;
    std::map<PartitionLabel, bool> named_;
};

void ModuleLowering::declare_partition(PartitionLabel label, const std::string* name, const SourceLoc& loc) {
    Policy& policy = result_.policy;
    for (auto& p : policy.partitions) {
        if (p.label != label) continue;
        if (name != nullptr) {
            if (named_[label] && p.name != *name) {
                throw Error(ErrorCode::DuplicatePartition,
                            "partition " + std::to_string(label) + " is already named '" + p.name + "'", loc);
            }
            p.name = *name;
            named_[label] = true;
        }
        return;
    }
    PartitionId p{label, name != nullptr ? *name : "p" + std::to_string(label)};
    named_[label] = name != nullptr;
    policy.partitions.push_back(p);
    policy.defaults[label] = AccessRights::none();
}

LoweringResult ModuleLowering::run(const SourceProgram& program) {
    Policy& policy = result_.policy;

    for (const auto& unit : program.units) {
        declare_partition(unit.pragma.label, nullptr, unit.pragma.loc);
        for (const auto& n : unit.names) declare_partition(n.label, &n.name, n.loc);
        policy.code_defaults.try_emplace(unit.pragma.label, unit.pragma.rights);
    }
    std::set<std::string> names;
    for (const auto& p : policy.partitions) {
        if (!names.insert(p.name).second) {
            throw Error(ErrorCode::DuplicatePartition, "partition name '" + p.name + "' is used twice");
        }
    }
    result_.module.partitions = policy.partitions;

    for (const auto& unit : program.units) {
        for (const auto& g : unit.globals) {
            if (global_index_.count(g.name)) {
                throw Error(ErrorCode::SemanticError, "global '" + g.name + "' is defined twice", g.loc);
            }
            ir::Global global;
            global.id = VariableId{g.name};
            global.type = g.type.kind;
            global.size = g.type.size;
            global.immutable = g.immutable;
            if (g.init_bytes) global.init = *g.init_bytes;
            if (g.init_value) {
                auto v = static_cast<uint64_t>(*g.init_value);
                for (int i = 0; i < 8; ++i) global.init.push_back(static_cast<uint8_t>(v >> (8 * i)));
            }
            if (g.partition_attr) {
                require_declared(g.partition_attr->label, g.partition_attr->loc);
                global.md = {g.partition_attr->label, g.partition_attr->rights, std::nullopt};
            } else {
                global.md = {unit.pragma.label, unit.pragma.rights, std::nullopt};
            }
            policy.data_assignment[global.id] = global.md.partition_label;
            if (global.immutable) policy.immutable.insert(global.id);
            result_.index.variables.insert(global.id);
            global_index_[g.name] = result_.module.globals.size();
            result_.module.globals.push_back(std::move(global));
        }
    }
    for (const auto& unit : program.units) {
        for (const auto& f : unit.functions) {
            if (functions_.count(f.name) || global_index_.count(f.name)) {
                throw Error(ErrorCode::SemanticError, "'" + f.name + "' is defined twice", f.loc);
            }
            functions_[f.name] = &f;
        }
    }
    for (const auto& unit : program.units) {
        UnitInfo info{unit.pragma.label, unit.pragma.rights};
        for (const auto& f : unit.functions) {
            FunctionLowering lowering(*this, f, info);
            result_.module.functions.push_back(lowering.run());
            policy.functions[f.name] = result_.module.functions.back().entry_stmt;
        }
    }
    return std::move(result_);
}

ir::Function FunctionLowering::run() {
    fn_.name = def_.name;
    fn_.noreturn = def_.noreturn;
    fn_.home = unit_.home;
    for (size_t i = 0; i < def_.params.size(); ++i) {
        for (size_t j = 0; j < i; ++j) {
            if (def_.params[j] == def_.params[i]) semantic("duplicate parameter '" + def_.params[i] + "'", def_.loc);
        }
        fn_.params.push_back(fn_.next_value++);
    }
    for (const auto& r : def_.refinements) {
        m_.require_declared(r.label, r.loc);
        refinements_.push_back({0, r.label, r.rights});
    }
    begin_statement(def_.loc);
    fn_.entry_stmt = stmt_;
    const StatementId header = stmt_;
    current_ = new_block();
    locals_.emplace_back();
    lower_block(def_.body);
    locals_.pop_back();

    stmt_ = header;
    emit(make(def_.noreturn ? Opcode::Halt : Opcode::Ret));

    auto& entry = fn_.blocks.front().instructions;
    entry.insert(entry.begin(), allocas_.begin(), allocas_.end());

    // Drop blocks that became unreachable after return or halt.
    std::set<BlockId> reachable;
    std::vector<BlockId> work = {fn_.blocks.front().id};
    while (!work.empty()) {
        BlockId b = work.back();
        work.pop_back();
        if (!reachable.insert(b).second) continue;
        for (const auto& in : block(b).instructions) {
            if (in.op == Opcode::Branch) {
                for (BlockId t : in.targets) work.push_back(t);
            }
        }
    }
    std::erase_if(fn_.blocks, [&](const ir::BasicBlock& b) { return !reachable.count(b.id); });
    return std::move(fn_);
}

void FunctionLowering::begin_statement(const SourceLoc&) {
    stmt_ = m_.next_statement();
    m_.record_statement(stmt_, unit_, def_.name, refinements_);
}

void FunctionLowering::lower_block(const std::vector<Stmt>& body) {
    for (const auto& st : body) lower_stmt(st);
}

void FunctionLowering::lower_stmt(const Stmt& st) {
    begin_statement(st.loc);
    switch (st.kind) {
    case Stmt::Kind::Let: {
        const VariableDecl& d = st.decl;
        if (locals_.back().count(d.name)) semantic("'" + d.name + "' is already declared in this block", d.loc);
        PartitionLabel label = unit_.home;
        AccessRights rights = unit_.rights;
        if (d.partition_attr) {
            m_.require_declared(d.partition_attr->label, d.partition_attr->loc);
            label = d.partition_attr->label;
            rights = d.partition_attr->rights;
        }
        int uses = ++local_name_uses_[d.name];
        VariableId id{def_.name + "::" + d.name + (uses > 1 ? "#" + std::to_string(uses) : "")};
        m_.record_local(id, label);

        Instruction alloca = make(Opcode::AllocStack);
        alloca.symbol = id.name;
        alloca.type = d.type.kind;
        alloca.width = d.type.size;
        alloca.md = ir::PolicyMetadata{label, rights, std::nullopt};
        ValueId slot = alloca.id;
        allocas_.push_back(std::move(alloca));

        if (!st.exprs.empty()) {
            ValueId v = rvalue(st.exprs[0]);
            emit_store(slot, v, 8);
        }
        locals_.back()[d.name] = LocalVar{id, slot, d.type};
        return;
    }
    case Stmt::Kind::Assign: {
        auto [addr, width] = lvalue(st.exprs[0]);
        ValueId v = rvalue(st.exprs[1]);
        emit_store(addr, v, width);
        return;
    }
    case Stmt::Kind::Expr:
        rvalue(st.exprs[0]);
        return;
    case Stmt::Kind::If: {
        const StatementId if_stmt = stmt_;
        ValueId c = rvalue(st.exprs[0]);
        BlockId then_b = new_block();
        BlockId else_b = st.has_else ? new_block() : 0;
        BlockId join = new_block();
        emit_cond_branch(c, then_b, st.has_else ? else_b : join);
        current_ = then_b;
        locals_.emplace_back();
        lower_block(st.body);
        locals_.pop_back();
        stmt_ = if_stmt;
        emit_branch(join);
        if (st.has_else) {
            current_ = else_b;
            locals_.emplace_back();
            lower_block(st.else_body);
            locals_.pop_back();
            stmt_ = if_stmt;
            emit_branch(join);
        }
        current_ = join;
        return;
    }
    case Stmt::Kind::While: {
        const StatementId while_stmt = stmt_;
        BlockId header = new_block();
        BlockId body = new_block();
        BlockId exit = new_block();
        emit_branch(header);
        current_ = header;
        ValueId c = rvalue(st.exprs[0]);
        emit_cond_branch(c, body, exit);
        current_ = body;
        locals_.emplace_back();
        lower_block(st.body);
        locals_.pop_back();
        stmt_ = while_stmt;
        emit_branch(header);
        current_ = exit;
        return;
    }
    case Stmt::Kind::Return: {
        if (def_.noreturn) semantic("'return' in noreturn function '" + def_.name + "'", st.loc);
        std::optional<ValueId> v;
        if (!st.exprs.empty()) v = rvalue(st.exprs[0]);
        for (auto it = refinements_.rbegin(); it != refinements_.rend(); ++it) {
            if (it->scope_id == 0) continue;
            Instruction exit = make(Opcode::ScopeExit);
            exit.imm = it->scope_id;
            emit(std::move(exit));
        }
        Instruction ret = make(Opcode::Ret);
        if (v) ret.operands.push_back(*v);
        emit(std::move(ret));
        current_ = new_block();
        return;
    }
    case Stmt::Kind::Free: {
        Instruction in = make(Opcode::HeapFree);
        in.operands.push_back(rvalue(st.exprs[0]));
        emit(std::move(in));
        return;
    }
    case Stmt::Kind::Halt:
        emit(make(Opcode::Halt));
        current_ = new_block();
        return;
    case Stmt::Kind::Refine: {
        m_.require_declared(st.refinement.label, st.refinement.loc);
        const StatementId refine_stmt = stmt_;
        uint32_t parent = 0;
        for (auto it = refinements_.rbegin(); it != refinements_.rend(); ++it) {
            if (it->scope_id != 0) {
                parent = it->scope_id;
                break;
            }
        }
        const uint32_t scope = m_.next_scope();
        refinements_.push_back({scope, st.refinement.label, st.refinement.rights});
        // The refinement statement lies inside its own extent.
        m_.record_statement(stmt_, unit_, def_.name, refinements_);
        fn_.scopes.push_back({scope, parent, refine_stmt, st.refinement.label, st.refinement.rights});
        Instruction enter = make(Opcode::ScopeEnter);
        enter.imm = scope;
        emit(std::move(enter));
        locals_.emplace_back();
        lower_block(st.body);
        locals_.pop_back();
        stmt_ = refine_stmt;
        Instruction exit = make(Opcode::ScopeExit);
        exit.imm = scope;
        emit(std::move(exit));
        refinements_.pop_back();
        return;
    }
    case Stmt::Kind::Block:
        locals_.emplace_back();
        lower_block(st.body);
        locals_.pop_back();
        return;
    }
}

ValueId FunctionLowering::rvalue(const Expr& e) {
    switch (e.kind) {
    case Expr::Kind::IntLit:
        return emit_const(e.value);
    case Expr::Kind::Name: {
        if (const LocalVar* local = find_local(e.name)) {
            if (local->type.kind == TypeKind::Aggregate) return local->slot;
            return emit_load(local->slot, 8);
        }
        if (auto param = find_param(e.name)) return *param;
        if (const ir::Global* g = m_.global(e.name)) {
            Instruction in = make(Opcode::GlobalAddr);
            in.symbol = e.name;
            ValueId addr = emit(std::move(in));
            if (g->type == TypeKind::Aggregate) return addr;
            return emit_load(addr, 8);
        }
        if (m_.is_function(e.name)) {
            Instruction in = make(Opcode::TakeFnAddr);
            in.symbol = e.name;
            return emit(std::move(in));
        }
        semantic("undefined name '" + e.name + "'", e.loc);
    }
    case Expr::Kind::AddrOf: {
        if (const LocalVar* local = find_local(e.name)) return local->slot;
        if (find_param(e.name)) semantic("parameter '" + e.name + "' has no address", e.loc);
        if (m_.global(e.name)) {
            Instruction in = make(Opcode::GlobalAddr);
            in.symbol = e.name;
            return emit(std::move(in));
        }
        if (m_.is_function(e.name)) {
            Instruction in = make(Opcode::TakeFnAddr);
            in.symbol = e.name;
            return emit(std::move(in));
        }
        semantic("undefined name '" + e.name + "'", e.loc);
    }
    case Expr::Kind::Deref:
        return emit_load(rvalue(e.operands[0]), 8);
    case Expr::Kind::Index: {
        ValueId base = rvalue(e.operands[0]);
        ValueId idx = rvalue(e.operands[1]);
        return emit_load(emit_arith(ir::ArithOp::Add, base, idx), 1);
    }
    case Expr::Kind::Call:
        return call(e);
    case Expr::Kind::Alloc: {
        ValueId size = rvalue(e.operands[0]);
        Instruction in = make(Opcode::HeapAlloc);
        in.operands.push_back(size);
        return emit(std::move(in));
    }
    case Expr::Kind::Binary: {
        static const std::map<BinaryOp, ir::ArithOp> kMap = {
            {BinaryOp::Add, ir::ArithOp::Add}, {BinaryOp::Sub, ir::ArithOp::Sub}, {BinaryOp::Mul, ir::ArithOp::Mul},
            {BinaryOp::Div, ir::ArithOp::Div}, {BinaryOp::Rem, ir::ArithOp::Rem}, {BinaryOp::And, ir::ArithOp::And},
            {BinaryOp::Or, ir::ArithOp::Or},   {BinaryOp::Xor, ir::ArithOp::Xor}, {BinaryOp::Shl, ir::ArithOp::Shl},
            {BinaryOp::Shr, ir::ArithOp::Shr}, {BinaryOp::Eq, ir::ArithOp::Eq},   {BinaryOp::Ne, ir::ArithOp::Ne},
            {BinaryOp::Lt, ir::ArithOp::Lt},   {BinaryOp::Le, ir::ArithOp::Le},   {BinaryOp::Gt, ir::ArithOp::Gt},
            {BinaryOp::Ge, ir::ArithOp::Ge},
        };
        ValueId a = rvalue(e.operands[0]);
        ValueId b = rvalue(e.operands[1]);
        return emit_arith(kMap.at(e.binary), a, b);
    }
    case Expr::Kind::Unary:
        return emit_arith(e.unary == UnaryOp::Neg ? ir::ArithOp::Neg : ir::ArithOp::Not, rvalue(e.operands[0]));
    case Expr::Kind::Conditional: {
        ValueId c = rvalue(e.operands[0]);
        BlockId then_b = new_block();
        BlockId else_b = new_block();
        BlockId join = new_block();
        emit_cond_branch(c, then_b, else_b);
        current_ = then_b;
        ValueId a = rvalue(e.operands[1]);
        BlockId then_end = current_;
        emit_branch(join);
        current_ = else_b;
        ValueId b = rvalue(e.operands[2]);
        BlockId else_end = current_;
        emit_branch(join);
        current_ = join;
        Instruction phi = make(Opcode::Phi);
        phi.operands = {a, b};
        phi.targets = {then_end, else_end};
        return emit(std::move(phi));
    }
    }
    semantic("unsupported expression", e.loc);
}

std::pair<ValueId, uint32_t> FunctionLowering::lvalue(const Expr& e) {
    switch (e.kind) {
    case Expr::Kind::Name: {
        if (const LocalVar* local = find_local(e.name)) {
            if (local->type.kind == TypeKind::Aggregate) semantic("cannot assign to array '" + e.name + "'", e.loc);
            return {local->slot, 8};
        }
        if (find_param(e.name)) semantic("cannot assign to parameter '" + e.name + "'", e.loc);
        if (const ir::Global* g = m_.global(e.name)) {
            if (g->type == TypeKind::Aggregate) semantic("cannot assign to array '" + e.name + "'", e.loc);
            Instruction in = make(Opcode::GlobalAddr);
            in.symbol = e.name;
            return {emit(std::move(in)), 8};
        }
        semantic("undefined variable '" + e.name + "'", e.loc);
    }
    case Expr::Kind::Deref:
        return {rvalue(e.operands[0]), 8};
    case Expr::Kind::Index: {
        ValueId base = rvalue(e.operands[0]);
        ValueId idx = rvalue(e.operands[1]);
        return {emit_arith(ir::ArithOp::Add, base, idx), 1};
    }
    default:
        semantic("expression is not assignable", e.loc);
    }
}

ValueId FunctionLowering::call(const Expr& e) {
    const bool is_variable = find_local(e.name) || find_param(e.name) || m_.global(e.name);
    if (!is_variable) {
        const FunctionDef* callee = m_.function(e.name);
        if (callee == nullptr) semantic("call to undefined function '" + e.name + "'", e.loc);
        if (callee->params.size() != e.operands.size()) {
            semantic("'" + e.name + "' takes " + std::to_string(callee->params.size()) + " arguments", e.loc);
        }
        std::vector<ValueId> args;
        for (const auto& a : e.operands) args.push_back(rvalue(a));
        Instruction in = make(Opcode::CallDirect);
        in.symbol = e.name;
        in.operands = std::move(args);
        in.noreturn = callee->noreturn;
        return emit(std::move(in));
    }
    Expr callee_expr;
    callee_expr.kind = Expr::Kind::Name;
    callee_expr.name = e.name;
    callee_expr.loc = e.loc;
    ValueId callee = rvalue(callee_expr);
    std::vector<ValueId> operands = {callee};
    for (const auto& a : e.operands) operands.push_back(rvalue(a));
    Instruction in = make(Opcode::CallIndirect);
    in.operands = std::move(operands);
    return emit(std::move(in));
}

} // namespace

LoweringResult lower_to_ir(const ast::SourceProgram& program) {
    ModuleLowering lowering;
    return lowering.run(program);
}

} // namespace partc
