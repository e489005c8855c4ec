#include "partc/analysis.hpp"

#include <algorithm>
#include <set>

namespace partc {

namespace {

using ir::Instruction;
using ir::Opcode;
using ir::ValueId;

class DefUse {
  public:
    DefUse(const ir::Module& module, const ir::Function& fn) : module_(module) {
        for (const auto& b : fn.blocks) {
            for (const auto& in : b.instructions) {
                defs_[in.id] = &in;
                for (ValueId op : in.operands) uses_[op].push_back(&in);
            }
        }
    }

    const Instruction* def(ValueId v) const {
        auto it = defs_.find(v);
        return it == defs_.end() ? nullptr : it->second;
    }

    // Partitions of declarations the pointer produced by an allocation is
    // stored into, following derived pointers forward.
    void forward(ValueId v, std::set<PartitionLabel>& out) {
        if (!visited_.insert({'f', v}).second) return;
        auto it = uses_.find(v);
        if (it == uses_.end()) return;
        for (const Instruction* use : it->second) {
            switch (use->op) {
            case Opcode::Store:
                if (use->operands[1] == v) address_roots(use->operands[0], out);
                break;
            case Opcode::Phi:
            case Opcode::Arith:
                forward(use->id, out);
                break;
            default:
                break;
            }
        }
    }

    // Partitions of the declarations an address may point into.
    void address_roots(ValueId v, std::set<PartitionLabel>& out) {
        if (!visited_.insert({'a', v}).second) return;
        const Instruction* in = def(v);
        if (in == nullptr) return;
        switch (in->op) {
        case Opcode::AllocStack:
            out.insert(in->md->partition_label);
            break;
        case Opcode::GlobalAddr:
            if (const ir::Global* g = module_.find_global(in->symbol)) out.insert(g->md.partition_label);
            break;
        case Opcode::Phi:
        case Opcode::Arith:
            for (ValueId op : in->operands) address_roots(op, out);
            break;
        case Opcode::HeapAlloc:
            forward(in->id, out);
            break;
        default:
            break;
        }
    }

    // Partitions a pointer value may have been loaded from or allocated for.
    void sources(ValueId v, std::set<PartitionLabel>& out) {
        if (!visited_.insert({'s', v}).second) return;
        const Instruction* in = def(v);
        if (in == nullptr) return;
        switch (in->op) {
        case Opcode::Load:
            address_roots(in->operands[0], out);
            break;
        case Opcode::Phi:
        case Opcode::Arith:
            for (ValueId op : in->operands) sources(op, out);
            break;
        case Opcode::HeapAlloc:
            forward(in->id, out);
            break;
        default:
            break;
        }
    }

  private:
    const ir::Module& module_;
    std::map<ValueId, const Instruction*> defs_;
    std::map<ValueId, std::vector<const Instruction*>> uses_;
    std::set<std::pair<char, ValueId>> visited_;
};

std::string join_labels(const std::set<PartitionLabel>& labels) {
    std::string out;
    for (PartitionLabel l : labels) {
        if (!out.empty()) out += ", ";
        out += std::to_string(l);
    }
    return out;
}

} // namespace

PartitionLabel resolve_allocation_partition(const ir::Module& module, const ir::InstrRef& site) {
    const ir::Function* fn = module.find_function(site.function);
    const Instruction* in = fn != nullptr ? fn->find_instruction(site.id) : nullptr;
    if (in == nullptr || (in->op != Opcode::HeapAlloc && in->op != Opcode::HeapFree)) {
        throw Error(ErrorCode::SemanticError,
                    "%" + std::to_string(site.id) + " in @" + site.function + " is not an allocation site");
    }
    DefUse graph(module, *fn);
    std::set<PartitionLabel> found;
    if (in->op == Opcode::HeapAlloc) {
        graph.forward(in->id, found);
    } else {
        graph.sources(in->operands[0], found);
    }
    if (found.size() > 1) {
        throw Error(ErrorCode::MultiplePartitions, "allocation site %" + std::to_string(site.id) + " (stmt " +
                                                       std::to_string(in->stmt.value) + ") in @" + site.function +
                                                       " reaches partitions " + join_labels(found));
    }
    return found.empty() ? fn->home : *found.begin();
}

std::vector<AddressTakenSite> find_address_taken(const ir::Module& module) {
    std::vector<AddressTakenSite> out;
    for (const auto& fn : module.functions) {
        for (const auto& b : fn.blocks) {
            for (const auto& in : b.instructions) {
                if (in.op == Opcode::TakeFnAddr) out.push_back({{fn.name, in.id}, in.symbol});
            }
        }
    }
    return out;
}

} // namespace partc
