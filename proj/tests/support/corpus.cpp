#include "corpus.hpp"

#include <sstream>

#include "partc/machine.hpp"
#include "partc/oracle.hpp"
#include "partc/pipeline.hpp"

namespace partc::testgen {

namespace {

uint32_t largest_function(const ir::Module& m) {
    uint32_t best = 0;
    for (const auto& fn : m.functions) {
        uint32_t n = 0;
        for (const auto& b : fn.blocks) n += static_cast<uint32_t>(b.instructions.size());
        best = std::max(best, n);
    }
    return best;
}

CaseFeatures features_of(const ir::Module& m) {
    CaseFeatures f;
    for (const auto& fn : m.functions) {
        for (const auto& s : fn.scopes) f.nested_refinement = f.nested_refinement || s.parent != 0;
        for (const auto& b : fn.blocks) {
            for (size_t i = 1; i < b.instructions.size(); ++i) {
                f.early_return = f.early_return || (b.instructions[i].op == ir::Opcode::Ret &&
                                                    b.instructions[i - 1].op == ir::Opcode::ScopeExit);
            }
            for (const auto& in : b.instructions) {
                if (in.op == ir::Opcode::CallDirect) f.direct_call = true;
                if (in.op == ir::Opcode::CallIndirect) f.indirect_call = true;
                if (in.op == ir::Opcode::HeapAlloc) f.alloc = true;
                if (in.op == ir::Opcode::ScopeEnter) f.refinement = true;
            }
        }
    }
    return f;
}

} // namespace

uint32_t max_function_size(const std::string& source) {
    return largest_function(build_program(source, "gen.pml").source_ir);
}

CaseOutcome run_case(const GeneratedProgram& program, uint32_t max_instructions) {
    CaseOutcome out;
    BuildArtifact a;
    try {
        a = build_program(program.source, "gen.pml");
    } catch (const Error& e) {
        out.status = CaseStatus::Rejected;
        out.detail = std::string(to_string(e.code())) + ": " + e.message();
        return out;
    }
    if (largest_function(a.source_ir) > max_instructions) {
        out.status = CaseStatus::TooLarge;
        return out;
    }
    out.status = CaseStatus::Ran;
    out.features = features_of(a.source_ir);

    Machine m = Machine::init(a.layout, a.policy, a.keys);
    m.load(a.instrumented.ir);
    const RunResult run = m.run(a.instrumented, "main", program.input);
    const OracleResult oracle = oracle_run(a.source_ir, a.policy, program.input);

    out.faulted = run.fault.has_value();
    if (run.fault) out.fault_kind = std::string(to_string(run.fault->kind));
    std::ostringstream why;
    if (run.fault) {
        if (oracle.violations.empty()) {
            why << "machine fault " << run.fault->describe() << " but oracle clean";
        } else {
            const Violation& v = *oracle.violations.begin();
            if (v.stmt != run.fault->stmt || expected_fault(v.kind) != run.fault->kind) {
                why << "machine " << run.fault->describe() << " vs oracle " << to_string(v.kind) << " at stmt "
                    << v.stmt.value;
            }
        }
    } else if (!oracle.violations.empty()) {
        const Violation& v = *oracle.violations.begin();
        why << "oracle " << to_string(v.kind) << " at stmt " << v.stmt.value << " but machine clean";
    } else if (run.halted != oracle.halted || run.return_value != oracle.return_value) {
        why << "result differs: machine " << (run.halted ? "halt" : std::to_string(run.return_value.value_or(0)))
            << " oracle " << (oracle.halted ? "halt" : std::to_string(oracle.return_value.value_or(0)));
    }
    out.detail = why.str();
    out.agree = out.detail.empty();

    const RestorationReport r = check_restoration(m.trace());
    out.restoration_ok = r.ok();
    out.restored_calls = r.checked_calls;
    out.restored_scopes = r.checked_scopes;
    if (!r.ok() && out.detail.empty()) out.detail = "restoration: " + r.violations.front();
    return out;
}

} // namespace partc::testgen
