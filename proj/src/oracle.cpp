#include "partc/oracle.hpp"

#include <map>
#include <unordered_map>
#include <vector>

#include "partc/analysis.hpp"

namespace partc {

namespace {

struct Value {
    enum class Kind : uint8_t { Int, Ptr, Fn };
    Kind kind = Kind::Int;
    uint64_t bits = 0; // integer value, pointer offset or function index
    uint32_t object = 0;

    static Value integer(uint64_t v) { return {Kind::Int, v, 0}; }
    static Value pointer(uint32_t object, uint64_t offset) { return {Kind::Ptr, offset, object}; }
    static Value function(uint32_t index) { return {Kind::Fn, index, 0}; }
    [[nodiscard]] bool truthy() const { return kind != Kind::Int || bits != 0; }
};

struct Object {
    enum class Kind : uint8_t { Global, Stack, Heap };
    Kind kind = Kind::Global;
    PartitionLabel partition = 0;
    bool immutable = false;
    bool live = true;
    std::vector<uint8_t> bytes;
    std::map<uint64_t, Value> shadow;
};

struct Stop {
    Violation violation;
};

struct FunctionInfo {
    const ir::Function* fn = nullptr;
    uint32_t index = 0;
    std::unordered_map<ir::BlockId, const ir::BasicBlock*> blocks;
};

struct Frame {
    const FunctionInfo* info = nullptr;
    std::vector<Value> values;
    const ir::BasicBlock* block = nullptr;
    ir::BlockId prev = 0;
    size_t ip = 0;
    std::vector<uint32_t> stack_objects;
    ir::ValueId result = 0;
};

class Monitor {
  public:
    Monitor(const ir::Module& module, const Policy& policy, uint64_t step_limit)
        : module_(module), policy_(policy), step_limit_(step_limit) {
        for (size_t i = 0; i < module.functions.size(); ++i) {
            FunctionInfo& info = infos_[module.functions[i].name];
            info.fn = &module.functions[i];
            info.index = static_cast<uint32_t>(i);
            for (const auto& b : module.functions[i].blocks) info.blocks[b.id] = &b;
        }
        for (const auto& g : module.globals) {
            Object o;
            o.kind = Object::Kind::Global;
            o.partition = g.md.partition_label;
            o.immutable = g.immutable;
            o.bytes.assign(g.size, 0);
            for (size_t i = 0; i < g.init.size() && i < g.size; ++i) o.bytes[i] = g.init[i];
            globals_[g.id.name] = static_cast<uint32_t>(objects_.size());
            objects_.push_back(std::move(o));
        }
    }

    OracleResult run(std::string_view entry, std::span<const uint8_t> input);

  private:
    [[noreturn]] static void stop(StatementId stmt, ViolationKind kind) { throw Stop{{stmt, kind}}; }

    Object& object_at(const Value& ptr, uint64_t width, StatementId stmt) {
        if (ptr.kind != Value::Kind::Ptr) stop(stmt, ViolationKind::OutOfBounds);
        Object& o = objects_[ptr.object];
        if (!o.live || ptr.bits > o.bytes.size() || o.bytes.size() - ptr.bits < width) {
            stop(stmt, ViolationKind::OutOfBounds);
        }
        return o;
    }

    Value load(const Value& ptr, uint32_t width, StatementId stmt) {
        Object& o = object_at(ptr, width, stmt);
        if (!effective_rights(stmt, o.partition, policy_, o.immutable).can_read()) stop(stmt, ViolationKind::Read);
        if (width == 8) {
            auto it = o.shadow.find(ptr.bits);
            if (it != o.shadow.end()) return it->second;
        }
        uint64_t v = 0;
        for (uint32_t i = 0; i < width; ++i) v |= static_cast<uint64_t>(o.bytes[ptr.bits + i]) << (8 * i);
        return Value::integer(v);
    }

    void store(const Value& ptr, const Value& value, uint32_t width, StatementId stmt) {
        Object& o = object_at(ptr, width, stmt);
        if (!effective_rights(stmt, o.partition, policy_, o.immutable).can_write()) stop(stmt, ViolationKind::Write);
        const uint64_t off = ptr.bits;
        o.shadow.erase(o.shadow.lower_bound(off >= 7 ? off - 7 : 0), o.shadow.lower_bound(off + width));
        for (uint32_t i = 0; i < width; ++i) o.bytes[off + i] = static_cast<uint8_t>(value.bits >> (8 * i));
        if (value.kind != Value::Kind::Int && width == 8) o.shadow[off] = value;
    }

    PartitionLabel site_partition(const std::string& fn, ir::ValueId id) {
        auto key = std::make_pair(fn, id);
        auto it = site_cache_.find(key);
        if (it != site_cache_.end()) return it->second;
        const PartitionLabel p = resolve_allocation_partition(module_, {fn, id});
        site_cache_[key] = p;
        return p;
    }

    static Value arith(ir::ArithOp op, const Value& a, const Value& b) {
        if (op == ir::ArithOp::Add && a.kind == Value::Kind::Ptr && b.kind == Value::Kind::Int) {
            return Value::pointer(a.object, a.bits + b.bits);
        }
        if (op == ir::ArithOp::Add && a.kind == Value::Kind::Int && b.kind == Value::Kind::Ptr) {
            return Value::pointer(b.object, a.bits + b.bits);
        }
        if (op == ir::ArithOp::Sub && a.kind == Value::Kind::Ptr && b.kind == Value::Kind::Int) {
            return Value::pointer(a.object, a.bits - b.bits);
        }
        return Value::integer(ir::eval_arith(op, a.bits, b.bits));
    }

    void push_frame(const FunctionInfo& info, const std::vector<Value>& args, ir::ValueId result) {
        Frame f;
        f.info = &info;
        f.values.assign(info.fn->next_value, Value{});
        for (size_t i = 0; i < info.fn->params.size(); ++i) {
            f.values[info.fn->params[i]] = i < args.size() ? args[i] : Value::integer(0);
        }
        f.block = info.fn->blocks.empty() ? nullptr : &info.fn->blocks.front();
        f.result = result;
        frames_.push_back(std::move(f));
    }

    void release(Frame& f) {
        for (uint32_t id : f.stack_objects) objects_[id].live = false;
    }

    const ir::Module& module_;
    const Policy& policy_;
    uint64_t step_limit_;
    std::unordered_map<std::string, FunctionInfo> infos_;
    std::map<std::string, uint32_t> globals_;
    std::vector<Object> objects_;
    std::vector<Frame> frames_;
    std::map<std::pair<std::string, ir::ValueId>, PartitionLabel> site_cache_;
};

OracleResult Monitor::run(std::string_view entry, std::span<const uint8_t> input) {
    OracleResult result;
    auto entry_it = infos_.find(std::string(entry));
    if (entry_it == infos_.end()) {
        throw Error(ErrorCode::SemanticError, "entry function '" + std::string(entry) + "' does not exist");
    }
    std::vector<Value> args = {Value::integer(0), Value::integer(0)};
    if (!input.empty()) {
        Object o;
        o.kind = Object::Kind::Heap;
        o.partition = entry_it->second.fn->home;
        o.bytes.assign(input.begin(), input.end());
        objects_.push_back(std::move(o));
        args = {Value::pointer(static_cast<uint32_t>(objects_.size() - 1), 0), Value::integer(input.size())};
    }
    push_frame(entry_it->second, args, 0);

    try {
        while (!frames_.empty()) {
            Frame& f = frames_.back();
            if (f.block == nullptr || f.ip >= f.block->instructions.size()) {
                throw Error(ErrorCode::SemanticError, "control fell off a block in @" + f.info->fn->name);
            }
            const ir::Instruction& in = f.block->instructions[f.ip++];
            if (++result.steps > step_limit_) break;
            auto v = [&f](ir::ValueId id) -> const Value& { return f.values[id]; };
            using ir::Opcode;
            switch (in.op) {
            case Opcode::AllocStack: {
                Object o;
                o.kind = Object::Kind::Stack;
                o.partition = in.md ? in.md->partition_label : f.info->fn->home;
                o.bytes.assign(in.width, 0);
                objects_.push_back(std::move(o));
                const auto id = static_cast<uint32_t>(objects_.size() - 1);
                f.stack_objects.push_back(id);
                f.values[in.id] = Value::pointer(id, 0);
                break;
            }
            case Opcode::HeapAlloc: {
                const Value size = v(in.operands[0]);
                if (size.kind == Value::Kind::Int && size.bits == 0) stop(in.stmt, ViolationKind::InvalidSize);
                if (size.kind != Value::Kind::Int || size.bits > kHeapPages * kPageSize) {
                    stop(in.stmt, ViolationKind::OutOfMemory);
                }
                Object o;
                o.kind = Object::Kind::Heap;
                o.partition = site_partition(f.info->fn->name, in.id);
                o.bytes.assign(size.bits, 0);
                objects_.push_back(std::move(o));
                f.values[in.id] = Value::pointer(static_cast<uint32_t>(objects_.size() - 1), 0);
                break;
            }
            case Opcode::HeapFree: {
                const Value ptr = v(in.operands[0]);
                const PartitionLabel site = site_partition(f.info->fn->name, in.id);
                if (ptr.kind != Value::Kind::Ptr || ptr.bits != 0) stop(in.stmt, ViolationKind::InvalidFree);
                Object& o = objects_[ptr.object];
                if (o.kind != Object::Kind::Heap) stop(in.stmt, ViolationKind::InvalidFree);
                if (!o.live) stop(in.stmt, ViolationKind::DoubleFree);
                if (o.partition != site) stop(in.stmt, ViolationKind::InvalidFree);
                o.live = false;
                break;
            }
            case Opcode::Load:
                f.values[in.id] = load(v(in.operands[0]), in.width, in.stmt);
                break;
            case Opcode::Store:
                store(v(in.operands[0]), v(in.operands[1]), in.width, in.stmt);
                break;
            case Opcode::CallDirect:
            case Opcode::CallIndirect: {
                const FunctionInfo* target = nullptr;
                size_t first_arg = 0;
                if (in.op == Opcode::CallDirect) {
                    auto it = infos_.find(in.symbol);
                    if (it == infos_.end()) stop(in.stmt, ViolationKind::Cfi);
                    target = &it->second;
                } else {
                    const Value callee = v(in.operands[0]);
                    if (callee.kind != Value::Kind::Fn) stop(in.stmt, ViolationKind::Cfi);
                    target = &infos_.at(module_.functions[callee.bits].name);
                    first_arg = 1;
                }
                std::vector<Value> call_args;
                for (size_t i = first_arg; i < in.operands.size(); ++i) call_args.push_back(v(in.operands[i]));
                push_frame(*target, call_args, in.id);
                break;
            }
            case Opcode::TakeFnAddr:
                f.values[in.id] = Value::function(infos_.at(in.symbol).index);
                break;
            case Opcode::GlobalAddr:
                f.values[in.id] = Value::pointer(globals_.at(in.symbol), 0);
                break;
            case Opcode::Phi:
                for (size_t i = 0; i < in.operands.size(); ++i) {
                    if (in.targets[i] == f.prev) {
                        f.values[in.id] = v(in.operands[i]);
                        break;
                    }
                }
                break;
            case Opcode::Branch: {
                ir::BlockId next = in.targets[0];
                if (!in.operands.empty() && !v(in.operands[0]).truthy()) next = in.targets[1];
                f.prev = f.block->id;
                f.block = f.info->blocks.at(next);
                f.ip = 0;
                break;
            }
            case Opcode::Ret: {
                const Value value = in.operands.empty() ? Value::integer(0) : v(in.operands[0]);
                release(f);
                const ir::ValueId slot = f.result;
                frames_.pop_back();
                if (frames_.empty()) {
                    result.return_value = value.bits;
                } else {
                    frames_.back().values[slot] = value;
                }
                break;
            }
            case Opcode::Const:
                f.values[in.id] = Value::integer(static_cast<uint64_t>(in.imm));
                break;
            case Opcode::Arith:
                f.values[in.id] =
                    arith(in.arith, v(in.operands[0]), in.operands.size() > 1 ? v(in.operands[1]) : Value{});
                break;
            case Opcode::Halt:
                result.halted = true;
                frames_.clear();
                break;
            case Opcode::ScopeEnter:
            case Opcode::ScopeExit:
                break;
            default:
                throw Error(ErrorCode::SemanticError, "reference monitor expects an uninstrumented module");
            }
        }
    } catch (const Stop& s) {
        result.violations.insert(s.violation);
    }
    return result;
}

} // namespace

std::string_view to_string(ViolationKind kind) {
    switch (kind) {
    case ViolationKind::Read: return "read";
    case ViolationKind::Write: return "write";
    case ViolationKind::Cfi: return "cfi";
    case ViolationKind::DoubleFree: return "double_free";
    case ViolationKind::InvalidFree: return "invalid_free";
    case ViolationKind::InvalidSize: return "invalid_size";
    case ViolationKind::OutOfBounds: return "out_of_bounds";
    case ViolationKind::OutOfMemory: return "out_of_memory";
    }
    return "?";
}

FaultKind expected_fault(ViolationKind kind) {
    switch (kind) {
    case ViolationKind::Read: return FaultKind::PkeyAccessFault;
    case ViolationKind::Write: return FaultKind::PkeyWriteFault;
    case ViolationKind::Cfi: return FaultKind::CfiFault;
    case ViolationKind::DoubleFree: return FaultKind::DoubleFree;
    case ViolationKind::InvalidFree: return FaultKind::InvalidFree;
    case ViolationKind::InvalidSize: return FaultKind::InvalidSize;
    case ViolationKind::OutOfBounds: return FaultKind::PkeyAccessFault;
    case ViolationKind::OutOfMemory: return FaultKind::OutOfMemory;
    }
    return FaultKind::PkeyAccessFault;
}

OracleResult oracle_run(const ir::Module& module, const Policy& policy, std::span<const uint8_t> input,
                        std::string_view entry, uint64_t step_limit) {
    Monitor monitor(module, policy, step_limit);
    return monitor.run(entry, input);
}

std::set<Violation> oracle_check(const ir::Module& module, const Policy& policy, std::span<const uint8_t> input,
                                 std::string_view entry) {
    return oracle_run(module, policy, input, entry).violations;
}

} // namespace partc
