#include "partc/instrument.hpp"

#include "partc/analysis.hpp"

namespace partc {

namespace {

using ir::Instruction;
using ir::Opcode;

Instruction runtime_call(ir::Function& fn, Opcode op, const Instruction& site) {
    Instruction in;
    in.id = fn.next_value++;
    in.op = op;
    in.stmt = site.stmt;
    in.md = site.md;
    return in;
}

PrivilegeVector entry_vector(const Policy& policy, const std::string& function) {
    auto entry = policy.function_entry(function);
    if (!entry) throw Error(ErrorCode::SemanticError, "no policy entry for function '" + function + "'");
    return policy.vector_at(*entry);
}

} // namespace

InstrumentedModule instrument_direct_calls(const ir::Module& module, const Policy& policy) {
    InstrumentedModule out{module, 0};
    for (auto& fn : out.ir.functions) {
        for (auto& block : fn.blocks) {
            std::vector<Instruction> rewritten;
            for (auto& in : block.instructions) {
                if (in.op != Opcode::CallDirect) {
                    rewritten.push_back(std::move(in));
                    continue;
                }
                const PrivilegeVector caller = policy.vector_at(in.stmt);
                const PrivilegeVector callee = entry_vector(policy, in.symbol);
                if (caller == callee) {
                    rewritten.push_back(std::move(in));
                    continue;
                }
                const ir::Function* target = module.find_function(in.symbol);
                const PartitionLabel caller_home = fn.home;
                const PartitionLabel callee_home = target != nullptr ? target->home : fn.home;

                Instruction enter = runtime_call(fn, Opcode::SetPrivileges, in);
                enter.vector = callee;
                enter.reason = ir::SwitchReason::CallEnter;
                enter.from = caller_home;
                enter.to = callee_home;
                rewritten.push_back(std::move(enter));
                ++out.switch_site_count;

                const bool returns = !in.noreturn;
                Instruction call = std::move(in);
                rewritten.push_back(call);
                if (returns) {
                    Instruction exit = runtime_call(fn, Opcode::SetPrivileges, call);
                    exit.vector = caller;
                    exit.reason = ir::SwitchReason::CallExit;
                    exit.from = callee_home;
                    exit.to = caller_home;
                    rewritten.push_back(std::move(exit));
                    ++out.switch_site_count;
                }
            }
            block.instructions = std::move(rewritten);
        }
    }
    return out;
}

ir::Module instrument_refinements(const ir::Module& module, const Policy& policy) {
    ir::Module out = module;
    for (auto& fn : out.functions) {
        const PrivilegeVector outer = policy.vector_at(fn.entry_stmt);
        for (auto& block : fn.blocks) {
            for (auto& in : block.instructions) {
                if (in.op != Opcode::ScopeEnter && in.op != Opcode::ScopeExit) continue;
                const ir::RefinementScope* scope = fn.find_scope(static_cast<uint32_t>(in.imm));
                if (scope == nullptr) {
                    throw Error(ErrorCode::SemanticError,
                                "unknown refinement scope " + std::to_string(in.imm) + " in @" + fn.name);
                }
                const ir::RefinementScope* parent = scope->parent != 0 ? fn.find_scope(scope->parent) : nullptr;
                const PartitionLabel outer_label = parent != nullptr ? parent->label : fn.home;
                const PrivilegeVector inside = policy.vector_at(scope->stmt);
                const PrivilegeVector enclosing = parent != nullptr ? policy.vector_at(parent->stmt) : outer;
                const bool entering = in.op == Opcode::ScopeEnter;
                in.op = Opcode::SetPrivileges;
                in.vector = entering ? inside : enclosing;
                in.reason = entering ? ir::SwitchReason::ScopeEnter : ir::SwitchReason::ScopeExit;
                in.from = entering ? outer_label : scope->label;
                in.to = entering ? scope->label : outer_label;
                in.imm = 0;
            }
        }
    }
    return out;
}

ir::Module instrument_indirect(const ir::Module& module, const Policy& policy) {
    ir::Module out = module;
    for (auto& fn : out.functions) {
        for (auto& block : fn.blocks) {
            std::vector<Instruction> rewritten;
            for (auto& in : block.instructions) {
                if (in.op == Opcode::TakeFnAddr) {
                    Instruction reg = runtime_call(fn, Opcode::RegisterAtFn, in);
                    reg.symbol = in.symbol;
                    reg.vector = entry_vector(policy, in.symbol);
                    rewritten.push_back(std::move(reg));
                    rewritten.push_back(std::move(in));
                } else if (in.op == Opcode::CallIndirect) {
                    Instruction dispatch = runtime_call(fn, Opcode::SetPrivilegesDynamic, in);
                    dispatch.operands = {in.operands.at(0)};
                    Instruction restore = runtime_call(fn, Opcode::RestorePrivilegesDynamic, in);
                    restore.vector = policy.vector_at(in.stmt);
                    rewritten.push_back(std::move(dispatch));
                    rewritten.push_back(std::move(in));
                    rewritten.push_back(std::move(restore));
                } else {
                    rewritten.push_back(std::move(in));
                }
            }
            block.instructions = std::move(rewritten);
        }
    }
    return out;
}

ir::Module instrument_allocations(const ir::Module& module, const KeyAssignment& keys) {
    ir::Module out = module;
    for (auto& fn : out.functions) {
        for (auto& block : fn.blocks) {
            for (auto& in : block.instructions) {
                if (in.op != Opcode::HeapAlloc && in.op != Opcode::HeapFree) continue;
                const PartitionLabel label = resolve_allocation_partition(module, {fn.name, in.id});
                auto key = keys.key_of(label);
                if (!key) {
                    throw Error(ErrorCode::UnknownPartition, "partition " + std::to_string(label) + " has no key");
                }
                in.op = in.op == Opcode::HeapAlloc ? Opcode::PartitionAlloc : Opcode::PartitionFree;
                in.key = *key;
            }
        }
    }
    return out;
}

InstrumentedModule instrument_module(const ir::Module& module, const Policy& policy, const KeyAssignment& keys) {
    ir::Module m = instrument_allocations(module, keys);
    m = instrument_refinements(m, policy);
    m = instrument_indirect(m, policy);
    return instrument_direct_calls(m, policy);
}

} // namespace partc
