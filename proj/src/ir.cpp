#include "partc/ir.hpp"

#include <array>
#include <charconv>
#include <utility>

#include "partc/error.hpp"

namespace partc::ir {

namespace {

constexpr std::array<std::pair<Opcode, std::string_view>, 23> kOpcodeNames = {{
    {Opcode::AllocStack, "alloc_stack"},
    {Opcode::HeapAlloc, "heap_alloc"},
    {Opcode::HeapFree, "heap_free"},
    {Opcode::Load, "load"},
    {Opcode::Store, "store"},
    {Opcode::CallDirect, "call_direct"},
    {Opcode::CallIndirect, "call_indirect"},
    {Opcode::TakeFnAddr, "take_fn_addr"},
    {Opcode::Phi, "phi"},
    {Opcode::Branch, "branch"},
    {Opcode::Ret, "ret"},
    {Opcode::Const, "const"},
    {Opcode::Arith, "arith"},
    {Opcode::GlobalAddr, "global_addr"},
    {Opcode::Halt, "halt"},
    {Opcode::ScopeEnter, "scope_enter"},
    {Opcode::ScopeExit, "scope_exit"},
    {Opcode::SetPrivileges, "set_privileges"},
    {Opcode::SetPrivilegesDynamic, "set_privileges_dynamic"},
    {Opcode::RestorePrivilegesDynamic, "restore_privileges_dynamic"},
    {Opcode::RegisterAtFn, "register_at_fn"},
    {Opcode::PartitionAlloc, "partition_alloc"},
    {Opcode::PartitionFree, "partition_free"},
}};

constexpr std::array<std::pair<ArithOp, std::string_view>, 18> kArithNames = {{
    {ArithOp::Add, "add"}, {ArithOp::Sub, "sub"}, {ArithOp::Mul, "mul"}, {ArithOp::Div, "div"},
    {ArithOp::Rem, "rem"}, {ArithOp::And, "and"}, {ArithOp::Or, "or"},   {ArithOp::Xor, "xor"},
    {ArithOp::Shl, "shl"}, {ArithOp::Shr, "shr"}, {ArithOp::Eq, "eq"},   {ArithOp::Ne, "ne"},
    {ArithOp::Lt, "lt"},   {ArithOp::Le, "le"},   {ArithOp::Gt, "gt"},   {ArithOp::Ge, "ge"},
    {ArithOp::Neg, "neg"}, {ArithOp::Not, "not"},
}};

constexpr std::array<std::pair<SwitchReason, std::string_view>, 4> kReasonNames = {{
    {SwitchReason::CallEnter, "call_enter"},
    {SwitchReason::CallExit, "call_exit"},
    {SwitchReason::ScopeEnter, "scope_enter"},
    {SwitchReason::ScopeExit, "scope_exit"},
}};

std::string_view type_name(ast::TypeKind kind) {
    switch (kind) {
    case ast::TypeKind::Scalar: return "scalar";
    case ast::TypeKind::Pointer: return "pointer";
    case ast::TypeKind::Aggregate: return "aggregate";
    }
    return "scalar";
}

std::optional<ast::TypeKind> parse_type_name(std::string_view text) {
    if (text == "scalar") return ast::TypeKind::Scalar;
    if (text == "pointer") return ast::TypeKind::Pointer;
    if (text == "aggregate") return ast::TypeKind::Aggregate;
    return std::nullopt;
}

std::string hex_bytes(const std::vector<uint8_t>& bytes) {
    static const char* kHex = "0123456789abcdef";
    if (bytes.empty()) return "-";
    std::string out;
    for (uint8_t b : bytes) {
        out += kHex[b >> 4];
        out += kHex[b & 15];
    }
    return out;
}

std::string val(ValueId id) { return "%" + std::to_string(id); }
std::string blk(BlockId id) { return "bb" + std::to_string(id); }

std::string value_list(const std::vector<ValueId>& values, size_t from) {
    std::string out;
    for (size_t i = from; i < values.size(); ++i) {
        if (i > from) out += ", ";
        out += val(values[i]);
    }
    return out;
}

std::string format_instruction(const Instruction& in) {
    std::string out = val(in.id) + " = " + std::string(to_string(in.op));
    auto add = [&out](const std::string& text) {
        out += ' ';
        out += text;
    };
    switch (in.op) {
    case Opcode::AllocStack:
        add("@" + in.symbol + " type=" + std::string(type_name(in.type)) + " size=" + std::to_string(in.width));
        break;
    case Opcode::HeapAlloc:
    case Opcode::HeapFree:
    case Opcode::SetPrivilegesDynamic:
        add(val(in.operands.at(0)));
        break;
    case Opcode::Load:
        add(val(in.operands.at(0)) + " width=" + std::to_string(in.width));
        break;
    case Opcode::Store:
        add(val(in.operands.at(0)) + ", " + val(in.operands.at(1)) + " width=" + std::to_string(in.width));
        break;
    case Opcode::CallDirect:
        add("@" + in.symbol + "(" + value_list(in.operands, 0) + ")");
        if (in.noreturn) add("noreturn");
        break;
    case Opcode::CallIndirect:
        add(val(in.operands.at(0)) + "(" + value_list(in.operands, 1) + ")");
        break;
    case Opcode::TakeFnAddr:
    case Opcode::GlobalAddr:
        add("@" + in.symbol);
        break;
    case Opcode::Phi: {
        std::string items;
        for (size_t i = 0; i < in.operands.size(); ++i) {
            if (i) items += ", ";
            items += "[" + val(in.operands[i]) + ", " + blk(in.targets.at(i)) + "]";
        }
        add(items);
        break;
    }
    case Opcode::Branch:
        if (in.operands.empty()) {
            add(blk(in.targets.at(0)));
        } else {
            add(val(in.operands[0]) + ", " + blk(in.targets.at(0)) + ", " + blk(in.targets.at(1)));
        }
        break;
    case Opcode::Ret:
        if (!in.operands.empty()) add(val(in.operands[0]));
        break;
    case Opcode::Const:
        add(std::to_string(in.imm));
        break;
    case Opcode::Arith:
        add(std::string(to_string(in.arith)) + " " + value_list(in.operands, 0));
        break;
    case Opcode::Halt:
        break;
    case Opcode::ScopeEnter:
    case Opcode::ScopeExit:
        add(std::to_string(in.imm));
        break;
    case Opcode::SetPrivileges:
        add("{" + in.vector.to_string() + "} reason=" + std::string(to_string(in.reason)) +
            " from=" + std::to_string(in.from) + " to=" + std::to_string(in.to));
        break;
    case Opcode::RestorePrivilegesDynamic:
        add("{" + in.vector.to_string() + "}");
        break;
    case Opcode::RegisterAtFn:
        add("@" + in.symbol + " {" + in.vector.to_string() + "}");
        break;
    case Opcode::PartitionAlloc:
    case Opcode::PartitionFree:
        add(val(in.operands.at(0)) + " key=" + std::to_string(in.key));
        break;
    }
    add("stmt=" + std::to_string(in.stmt.value));
    if (in.md) add(in.md->to_string());
    return out;
}

// ---- reader ----

class Cursor {
  public:
    Cursor(std::string_view text, size_t line) : text_(text), line_(line) {}

    [[noreturn]] void fail(const std::string& what) const {
        throw Error(ErrorCode::FormatError,
                    "IR line " + std::to_string(line_) + ": expected " + what + " near '" +
                        std::string(text_.substr(pos_, 24)) + "'");
    }

    void skip_ws() {
        while (pos_ < text_.size() && text_[pos_] == ' ') ++pos_;
    }
    bool done() {
        skip_ws();
        return pos_ >= text_.size();
    }
    bool peek(std::string_view s) {
        skip_ws();
        return text_.substr(pos_, s.size()) == s;
    }
    bool accept(std::string_view s) {
        if (!peek(s)) return false;
        pos_ += s.size();
        return true;
    }
    void expect(std::string_view s) {
        if (!accept(s)) fail("'" + std::string(s) + "'");
    }
    std::string_view token() {
        skip_ws();
        size_t start = pos_;
        while (pos_ < text_.size() && text_[pos_] != ' ' && text_[pos_] != ',' && text_[pos_] != '(' &&
               text_[pos_] != ')' && text_[pos_] != ']' && text_[pos_] != '}') {
            ++pos_;
        }
        return text_.substr(start, pos_ - start);
    }
    template <typename T>
    T number(std::string_view what) {
        std::string_view t = token();
        T v{};
        auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
        if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) fail(std::string(what));
        return v;
    }
    ValueId value() {
        expect("%");
        return number<ValueId>("value id");
    }
    BlockId block() {
        expect("bb");
        return number<BlockId>("block id");
    }
    std::string symbol() {
        expect("@");
        std::string_view t = token();
        if (t.empty()) fail("symbol");
        return std::string(t);
    }
    std::string_view keyed(std::string_view key) {
        expect(std::string(key) + "=");
        return token();
    }
    template <typename T>
    T keyed_number(std::string_view key) {
        expect(std::string(key) + "=");
        return number<T>(key);
    }
    PrivilegeVector vector() {
        expect("{");
        skip_ws();
        size_t end = text_.find('}', pos_);
        if (end == std::string_view::npos) fail("'}'");
        auto vec = PrivilegeVector::parse(text_.substr(pos_, end - pos_));
        if (!vec) fail("privilege vector");
        pos_ = end + 1;
        return *vec;
    }
    std::vector<ValueId> value_list_until(char close) {
        std::vector<ValueId> out;
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == close) return out;
        for (;;) {
            out.push_back(value());
            if (!accept(",")) break;
        }
        return out;
    }
    PolicyMetadata metadata() {
        PolicyMetadata md;
        expect("!partition(");
        md.partition_label = number<PartitionLabel>("partition label");
        expect(",");
        auto rights = AccessRights::parse(token());
        if (!rights) fail("rights");
        md.rights = *rights;
        expect(")");
        if (accept(",!scope(")) {
            md.refinement_scope_id = number<uint32_t>("scope id");
            expect(")");
        }
        return md;
    }

  private:
    std::string_view text_;
    size_t line_;
    size_t pos_ = 0;
};

std::vector<uint8_t> parse_hex(Cursor& c, std::string_view text) {
    std::vector<uint8_t> out;
    if (text == "-") return out;
    if (text.size() % 2 != 0) c.fail("hex bytes");
    for (size_t i = 0; i < text.size(); i += 2) {
        uint8_t b = 0;
        auto [ptr, ec] = std::from_chars(text.data() + i, text.data() + i + 2, b, 16);
        if (ec != std::errc() || ptr != text.data() + i + 2) c.fail("hex bytes");
        out.push_back(b);
    }
    return out;
}

Instruction parse_instruction(Cursor& c) {
    Instruction in;
    in.id = c.value();
    c.expect("=");
    auto op = parse_opcode(c.token());
    if (!op) c.fail("opcode");
    in.op = *op;
    switch (in.op) {
    case Opcode::AllocStack: {
        in.symbol = c.symbol();
        auto type = parse_type_name(c.keyed("type"));
        if (!type) c.fail("type");
        in.type = *type;
        in.width = c.keyed_number<uint32_t>("size");
        break;
    }
    case Opcode::HeapAlloc:
    case Opcode::HeapFree:
    case Opcode::SetPrivilegesDynamic:
        in.operands.push_back(c.value());
        break;
    case Opcode::Load:
        in.operands.push_back(c.value());
        in.width = c.keyed_number<uint32_t>("width");
        break;
    case Opcode::Store:
        in.operands.push_back(c.value());
        c.expect(",");
        in.operands.push_back(c.value());
        in.width = c.keyed_number<uint32_t>("width");
        break;
    case Opcode::CallDirect:
        in.symbol = c.symbol();
        c.expect("(");
        in.operands = c.value_list_until(')');
        c.expect(")");
        in.noreturn = c.accept("noreturn");
        break;
    case Opcode::CallIndirect: {
        in.operands.push_back(c.value());
        c.expect("(");
        auto args = c.value_list_until(')');
        in.operands.insert(in.operands.end(), args.begin(), args.end());
        c.expect(")");
        break;
    }
    case Opcode::TakeFnAddr:
    case Opcode::GlobalAddr:
        in.symbol = c.symbol();
        break;
    case Opcode::Phi:
        while (c.accept("[")) {
            in.operands.push_back(c.value());
            c.expect(",");
            in.targets.push_back(c.block());
            c.expect("]");
            if (!c.accept(",")) break;
        }
        break;
    case Opcode::Branch:
        if (c.peek("%")) {
            in.operands.push_back(c.value());
            c.expect(",");
            in.targets.push_back(c.block());
            c.expect(",");
            in.targets.push_back(c.block());
        } else {
            in.targets.push_back(c.block());
        }
        break;
    case Opcode::Ret:
        if (c.peek("%")) in.operands.push_back(c.value());
        break;
    case Opcode::Const:
        in.imm = c.number<int64_t>("constant");
        break;
    case Opcode::Arith: {
        auto arith = parse_arith(c.token());
        if (!arith) c.fail("arith op");
        in.arith = *arith;
        in.operands.push_back(c.value());
        if (!is_unary(in.arith)) {
            c.expect(",");
            in.operands.push_back(c.value());
        }
        break;
    }
    case Opcode::Halt:
        break;
    case Opcode::ScopeEnter:
    case Opcode::ScopeExit:
        in.imm = c.number<int64_t>("scope id");
        break;
    case Opcode::SetPrivileges: {
        in.vector = c.vector();
        auto reason = parse_switch_reason(c.keyed("reason"));
        if (!reason) c.fail("switch reason");
        in.reason = *reason;
        in.from = c.keyed_number<PartitionLabel>("from");
        in.to = c.keyed_number<PartitionLabel>("to");
        break;
    }
    case Opcode::RestorePrivilegesDynamic:
        in.vector = c.vector();
        break;
    case Opcode::RegisterAtFn:
        in.symbol = c.symbol();
        in.vector = c.vector();
        break;
    case Opcode::PartitionAlloc:
    case Opcode::PartitionFree:
        in.operands.push_back(c.value());
        in.key = c.keyed_number<ProtectionKey>("key");
        break;
    }
    in.stmt.value = c.keyed_number<uint32_t>("stmt");
    if (c.peek("!partition(")) in.md = c.metadata();
    if (!c.done()) c.fail("end of line");
    return in;
}

} // namespace

std::string_view to_string(Opcode op) {
    for (const auto& [o, name] : kOpcodeNames) {
        if (o == op) return name;
    }
    return "?";
}

std::optional<Opcode> parse_opcode(std::string_view text) {
    for (const auto& [o, name] : kOpcodeNames) {
        if (name == text) return o;
    }
    return std::nullopt;
}

std::string_view to_string(ArithOp op) {
    for (const auto& [o, name] : kArithNames) {
        if (o == op) return name;
    }
    return "?";
}

std::optional<ArithOp> parse_arith(std::string_view text) {
    for (const auto& [o, name] : kArithNames) {
        if (name == text) return o;
    }
    return std::nullopt;
}

bool is_unary(ArithOp op) { return op == ArithOp::Neg || op == ArithOp::Not; }

uint64_t eval_arith(ArithOp op, uint64_t lhs, uint64_t rhs) {
    const auto sl = static_cast<int64_t>(lhs);
    const auto sr = static_cast<int64_t>(rhs);
    switch (op) {
    case ArithOp::Add: return lhs + rhs;
    case ArithOp::Sub: return lhs - rhs;
    case ArithOp::Mul: return lhs * rhs;
    case ArithOp::Div:
        if (rhs == 0 || (sl == INT64_MIN && sr == -1)) return 0;
        return static_cast<uint64_t>(sl / sr);
    case ArithOp::Rem:
        if (rhs == 0 || (sl == INT64_MIN && sr == -1)) return 0;
        return static_cast<uint64_t>(sl % sr);
    case ArithOp::And: return lhs & rhs;
    case ArithOp::Or: return lhs | rhs;
    case ArithOp::Xor: return lhs ^ rhs;
    case ArithOp::Shl: return lhs << (rhs & 63);
    case ArithOp::Shr: return lhs >> (rhs & 63);
    case ArithOp::Eq: return lhs == rhs;
    case ArithOp::Ne: return lhs != rhs;
    case ArithOp::Lt: return sl < sr;
    case ArithOp::Le: return sl <= sr;
    case ArithOp::Gt: return sl > sr;
    case ArithOp::Ge: return sl >= sr;
    case ArithOp::Neg: return 0 - lhs;
    case ArithOp::Not: return lhs == 0;
    }
    return 0;
}

std::string PolicyMetadata::to_string() const {
    std::string out = "!partition(" + std::to_string(partition_label) + "," + std::string(rights.to_string()) + ")";
    if (refinement_scope_id) out += ",!scope(" + std::to_string(*refinement_scope_id) + ")";
    return out;
}

std::string_view to_string(SwitchReason reason) {
    for (const auto& [r, name] : kReasonNames) {
        if (r == reason) return name;
    }
    return "?";
}

std::optional<SwitchReason> parse_switch_reason(std::string_view text) {
    for (const auto& [r, name] : kReasonNames) {
        if (name == text) return r;
    }
    return std::nullopt;
}

const BasicBlock* Function::find_block(BlockId id) const {
    for (const auto& b : blocks) {
        if (b.id == id) return &b;
    }
    return nullptr;
}

const RefinementScope* Function::find_scope(uint32_t id) const {
    for (const auto& s : scopes) {
        if (s.id == id) return &s;
    }
    return nullptr;
}

const Instruction* Function::find_instruction(ValueId id) const {
    for (const auto& b : blocks) {
        for (const auto& in : b.instructions) {
            if (in.id == id) return &in;
        }
    }
    return nullptr;
}

const Function* Module::find_function(std::string_view name) const {
    for (const auto& f : functions) {
        if (f.name == name) return &f;
    }
    return nullptr;
}

const Global* Module::find_global(std::string_view name) const {
    for (const auto& g : globals) {
        if (g.id.name == name) return &g;
    }
    return nullptr;
}

std::string dump(const Module& module) {
    std::string out;
    for (const auto& p : module.partitions) {
        out += "partition " + std::to_string(p.label) + " " + p.name + "\n";
    }
    for (const auto& g : module.globals) {
        out += "global @" + g.id.name + " type=" + std::string(type_name(g.type)) + " size=" +
               std::to_string(g.size) + " const=" + (g.immutable ? "1" : "0") + " init=" + hex_bytes(g.init) +
               " " + g.md.to_string() + "\n";
    }
    for (const auto& f : module.functions) {
        out += "fn @" + f.name + "(" + value_list(f.params, 0) + ") home=" + std::to_string(f.home) +
               " stmt=" + std::to_string(f.entry_stmt.value) + " values=" + std::to_string(f.next_value);
        if (f.noreturn) out += " noreturn";
        out += "\n";
        for (const auto& s : f.scopes) {
            PolicyMetadata md{s.label, s.rights, std::nullopt};
            out += "  scope " + std::to_string(s.id) + " parent=" + std::to_string(s.parent) +
                   " stmt=" + std::to_string(s.stmt.value) + " " + md.to_string() + "\n";
        }
        for (const auto& b : f.blocks) {
            out += blk(b.id) + ":\n";
            for (const auto& in : b.instructions) out += "  " + format_instruction(in) + "\n";
        }
        out += "end\n";
    }
    return out;
}

Module parse_module(std::string_view text) {
    Module module;
    Function* fn = nullptr;
    BasicBlock* block = nullptr;
    size_t line_no = 0;
    while (!text.empty()) {
        auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
        ++line_no;
        if (line.empty()) continue;
        Cursor c(line, line_no);
        if (fn == nullptr) {
            if (c.accept("partition ")) {
                PartitionId p;
                p.label = c.number<PartitionLabel>("partition label");
                p.name = std::string(c.token());
                if (p.name.empty() || !c.done()) c.fail("partition name");
                module.partitions.push_back(p);
            } else if (c.accept("global ")) {
                Global g;
                g.id.name = c.symbol();
                auto type = parse_type_name(c.keyed("type"));
                if (!type) c.fail("type");
                g.type = *type;
                g.size = c.keyed_number<uint32_t>("size");
                g.immutable = c.keyed_number<int>("const") != 0;
                g.init = parse_hex(c, c.keyed("init"));
                g.md = c.metadata();
                if (!c.done()) c.fail("end of line");
                module.globals.push_back(std::move(g));
            } else if (c.accept("fn ")) {
                Function f;
                f.name = c.symbol();
                c.expect("(");
                f.params = c.value_list_until(')');
                c.expect(")");
                f.home = c.keyed_number<PartitionLabel>("home");
                f.entry_stmt.value = c.keyed_number<uint32_t>("stmt");
                f.next_value = c.keyed_number<ValueId>("values");
                f.noreturn = c.accept("noreturn");
                if (!c.done()) c.fail("end of line");
                module.functions.push_back(std::move(f));
                fn = &module.functions.back();
                block = nullptr;
            } else {
                c.fail("'partition', 'global' or 'fn'");
            }
            continue;
        }
        if (c.accept("end") && c.done()) {
            fn = nullptr;
            block = nullptr;
            continue;
        }
        Cursor c2(line, line_no);
        if (c2.accept("scope ")) {
            RefinementScope s;
            s.id = c2.number<uint32_t>("scope id");
            s.parent = c2.keyed_number<uint32_t>("parent");
            s.stmt.value = c2.keyed_number<uint32_t>("stmt");
            PolicyMetadata md = c2.metadata();
            s.label = md.partition_label;
            s.rights = md.rights;
            if (!c2.done()) c2.fail("end of line");
            fn->scopes.push_back(s);
            continue;
        }
        Cursor c3(line, line_no);
        if (line.rfind("bb", 0) == 0 && line.back() == ':') {
            BasicBlock b;
            Cursor header(line.substr(0, line.size() - 1), line_no);
            b.id = header.block();
            if (!header.done()) header.fail("end of block label");
            fn->blocks.push_back(std::move(b));
            block = &fn->blocks.back();
            continue;
        }
        if (block == nullptr) c3.fail("basic block label");
        block->instructions.push_back(parse_instruction(c3));
    }
    if (fn != nullptr) throw Error(ErrorCode::FormatError, "IR function is missing its 'end' line");
    return module;
}

} // namespace partc::ir
