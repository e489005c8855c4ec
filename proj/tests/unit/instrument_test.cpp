#include <doctest.h>

#include <map>
#include <set>

#include "generator.hpp"
#include "helpers.hpp"
#include "partc/analysis.hpp"
#include "partc/instrument.hpp"
#include "partc/lower.hpp"
#include "partc/parser.hpp"

using namespace partc;
using ir::Opcode;

namespace {

struct Built {
    LoweringResult lowered;
    KeyAssignment keys;
    InstrumentedModule inst;
};

Built build(std::string_view text) {
    Built b;
    b.lowered = lower_to_ir(parse_program(text, "t.pml"));
    b.keys = map_partitions_to_keys(b.lowered.policy.partitions);
    b.inst = instrument_module(b.lowered.module, b.lowered.policy, b.keys);
    return b;
}

int count_op(const ir::Module& m, Opcode op) {
    int n = 0;
    for (const auto& fn : m.functions) {
        for (const auto& b : fn.blocks) {
            for (const auto& in : b.instructions) n += in.op == op;
        }
    }
    return n;
}

/// Switch sites predicted from the uninstrumented module: every direct call
/// whose caller and callee vectors differ costs two, or one when the callee
/// never returns.
uint32_t predicted_switch_sites(const ir::Module& m, const Policy& p) {
    uint32_t n = 0;
    for (const auto& fn : m.functions) {
        for (const auto& b : fn.blocks) {
            for (const auto& in : b.instructions) {
                if (in.op != Opcode::CallDirect) continue;
                const ir::Function* callee = m.find_function(in.symbol);
                bool same = true;
                for (const auto& part : p.partitions) {
                    same = same && p.privilege(in.stmt, part.label) == p.privilege(callee->entry_stmt, part.label);
                }
                if (!same) n += callee->noreturn ? 1 : 2;
            }
        }
    }
    return n;
}

bool is_runtime_call(Opcode op) {
    return op == Opcode::SetPrivileges || op == Opcode::SetPrivilegesDynamic ||
           op == Opcode::RestorePrivilegesDynamic || op == Opcode::RegisterAtFn;
}

/// Walks every path of every function tracking the rights image the
/// instrumentation establishes, and reports the first instruction that runs
/// under an image other than its statement's vector.
std::string symbolic_walk(const ir::Module& m, const Policy& p) {
    for (const auto& fn : m.functions) {
        const PrivilegeVector entry = p.vector_at(fn.entry_stmt);
        using State = std::optional<PrivilegeVector>;
        std::set<std::pair<ir::BlockId, std::string>> seen;
        std::vector<std::pair<ir::BlockId, State>> work{{fn.blocks.front().id, entry}};
        while (!work.empty()) {
            auto [id, state] = work.back();
            work.pop_back();
            if (!seen.insert({id, state ? state->to_string() : "?"}).second) continue;
            bool dead = false;
            for (const auto& in : fn.find_block(id)->instructions) {
                if (dead || in.op == Opcode::Halt) break;
                const std::string where = "@" + fn.name + " %" + std::to_string(in.id);
                switch (in.op) {
                case Opcode::SetPrivileges:
                case Opcode::RestorePrivilegesDynamic: state = in.vector; break;
                case Opcode::SetPrivilegesDynamic: state.reset(); break;
                case Opcode::RegisterAtFn: break;
                // frame slots are carved at entry, whatever statement declared them
                case Opcode::AllocStack: break;
                case Opcode::CallIndirect:
                    if (state) return where + ": indirect call without dynamic switch";
                    break;
                case Opcode::CallDirect: {
                    const auto* callee = m.find_function(in.symbol);
                    if (!state || !(*state == p.vector_at(callee->entry_stmt))) {
                        return where + ": callee entered under the wrong image";
                    }
                    dead = callee->noreturn;
                    break;
                }
                case Opcode::Ret:
                    if (!state || !(*state == entry)) return where + ": returns without restoring";
                    break;
                default:
                    if (!state || !(*state == p.vector_at(in.stmt))) {
                        return where + ": runs under " + (state ? state->to_string() : "?") + ", expected " +
                               p.vector_at(in.stmt).to_string();
                    }
                }
                if (in.op == Opcode::Branch) {
                    for (auto t : in.targets) work.emplace_back(t, state);
                }
            }
        }
    }
    return {};
}

/// Block dominators by the classic iterative data-flow formulation.
std::map<ir::BlockId, std::set<ir::BlockId>> dominators(const ir::Function& fn) {
    std::map<ir::BlockId, std::set<ir::BlockId>> preds;
    std::set<ir::BlockId> all;
    for (const auto& b : fn.blocks) {
        all.insert(b.id);
        for (const auto& in : b.instructions) {
            if (in.op == Opcode::Branch) {
                for (auto t : in.targets) preds[t].insert(b.id);
            }
        }
    }
    std::map<ir::BlockId, std::set<ir::BlockId>> dom;
    const ir::BlockId entry = fn.blocks.front().id;
    for (auto id : all) dom[id] = id == entry ? std::set<ir::BlockId>{entry} : all;
    bool changed = true;
    while (changed) {
        changed = false;
        for (auto id : all) {
            if (id == entry) continue;
            std::set<ir::BlockId> next = all;
            for (auto pr : preds[id]) {
                std::set<ir::BlockId> keep;
                for (auto d : next) {
                    if (dom[pr].count(d)) keep.insert(d);
                }
                next = keep;
            }
            next.insert(id);
            if (next != dom[id]) {
                dom[id] = next;
                changed = true;
            }
        }
    }
    return dom;
}

} // namespace

TEST_CASE("direct-call switch counts") {
    SUBCASE("cross-partition returning call costs two") {
        const auto b = build(R"(#unit a
#pragma partition 0 rw
fn main() { return g(); }
#unit b
#pragma partition 1 rw
fn g() { return 1; }
)");
        CHECK(b.inst.switch_site_count == 2);
        CHECK(count_op(b.inst.ir, Opcode::SetPrivileges) == 2);
    }
    SUBCASE("same-partition call is elided") {
        const auto b = build("#pragma partition 0 rw\nfn main() { return g(); }\nfn g() { return 1; }\n");
        CHECK(b.inst.switch_site_count == 0);
        CHECK(b.inst.ir == b.lowered.module);
    }
    SUBCASE("noreturn callee costs one") {
        const auto b = build(R"(#unit a
#pragma partition 0 rw
fn main() { g(); }
#unit b
#pragma partition 1 rw
noreturn fn g() { halt; }
)");
        CHECK(b.inst.switch_site_count == 1);
    }
    SUBCASE("a call inside a refinement switches even within one partition") {
        const auto b = build(R"(#pragma partition 0 rw
#pragma partition_name 1 other
fn main() {
    [[privilege(1, r)]] { return g(); }
}
fn g() { return 1; }
)");
        CHECK(b.inst.switch_site_count == 2);
    }
    SUBCASE("the constructed accounting program") {
        const auto a = test::build_data("switch_count.pml");
        CHECK(a.instrumented.switch_site_count == 21);
    }
}

TEST_CASE("switch sites match the independent count on random programs") {
    for (uint64_t seed = 0; seed < 500; ++seed) {
        const auto g = testgen::generate_program(seed);
        const auto b = build(g.source);
        CAPTURE(seed);
        CHECK(b.inst.switch_site_count == predicted_switch_sites(b.lowered.module, b.lowered.policy));
        int call_switches = 0;
        for (const auto& fn : b.inst.ir.functions) {
            for (const auto& blk : fn.blocks) {
                for (const auto& in : blk.instructions) {
                    call_switches += in.op == Opcode::SetPrivileges && (in.reason == ir::SwitchReason::CallEnter ||
                                                                        in.reason == ir::SwitchReason::CallExit);
                }
            }
        }
        CHECK(call_switches == static_cast<int>(b.inst.switch_site_count));
    }
}

TEST_CASE("every instruction runs under its statement's vector") {
    for (uint64_t seed = 0; seed < 500; ++seed) {
        const auto b = build(testgen::generate_program(seed).source);
        CAPTURE(seed);
        CHECK(symbolic_walk(b.inst.ir, b.lowered.policy) == "");
    }
    const auto s = test::build_data("signing.pml");
    CHECK(symbolic_walk(s.instrumented.ir, s.policy) == "");
}

TEST_CASE("the walk notices a missing restore") {
    auto s = test::build_data("signing.pml");
    bool dropped = false;
    for (auto& fn : s.instrumented.ir.functions) {
        for (auto& b : fn.blocks) {
            for (auto it = b.instructions.begin(); it != b.instructions.end() && !dropped; ++it) {
                if (it->op == Opcode::SetPrivileges && it->reason == ir::SwitchReason::ScopeExit) {
                    b.instructions.erase(it);
                    dropped = true;
                    break;
                }
            }
        }
    }
    REQUIRE(dropped);
    CHECK(symbolic_walk(s.instrumented.ir, s.policy) != "");
}

TEST_CASE("rewrites are complete") {
    for (uint64_t seed = 0; seed < 500; ++seed) {
        const auto b = build(testgen::generate_program(seed).source);
        CAPTURE(seed);
        const auto& m = b.inst.ir;
        for (Opcode op : {Opcode::HeapAlloc, Opcode::HeapFree, Opcode::ScopeEnter, Opcode::ScopeExit}) {
            CHECK(count_op(m, op) == 0);
        }
        CHECK(count_op(m, Opcode::PartitionAlloc) == count_op(b.lowered.module, Opcode::HeapAlloc));
        CHECK(count_op(m, Opcode::PartitionFree) == count_op(b.lowered.module, Opcode::HeapFree));
        CHECK(count_op(m, Opcode::RegisterAtFn) == count_op(m, Opcode::TakeFnAddr));
        CHECK(count_op(m, Opcode::SetPrivilegesDynamic) == count_op(m, Opcode::CallIndirect));
        CHECK(count_op(m, Opcode::RestorePrivilegesDynamic) == count_op(m, Opcode::CallIndirect));
        for (const auto& fn : m.functions) {
            for (const auto& blk : fn.blocks) {
                const auto& ins = blk.instructions;
                for (size_t i = 0; i < ins.size(); ++i) {
                    if (ins[i].op == Opcode::TakeFnAddr) {
                        REQUIRE(i > 0);
                        CHECK(ins[i - 1].op == Opcode::RegisterAtFn);
                        CHECK(ins[i - 1].symbol == ins[i].symbol);
                        CHECK(ins[i - 1].vector == b.lowered.policy.vector_at(*b.lowered.policy.function_entry(ins[i].symbol)));
                    }
                    if (ins[i].op == Opcode::CallIndirect) {
                        REQUIRE(i > 0);
                        REQUIRE(i + 1 < ins.size());
                        CHECK(ins[i - 1].op == Opcode::SetPrivilegesDynamic);
                        CHECK(ins[i - 1].operands == std::vector<ir::ValueId>{ins[i].operands[0]});
                        CHECK(ins[i + 1].op == Opcode::RestorePrivilegesDynamic);
                        CHECK(ins[i + 1].vector == b.lowered.policy.vector_at(ins[i].stmt));
                    }
                }
            }
        }
    }
}

TEST_CASE("allocation keys come from the resolved partition") {
    for (uint64_t seed = 0; seed < 300; ++seed) {
        const auto b = build(testgen::generate_program(seed).source);
        const ir::Module allocs = instrument_allocations(b.lowered.module, b.keys);
        for (const auto& fn : b.lowered.module.functions) {
            for (const auto& blk : fn.blocks) {
                for (const auto& in : blk.instructions) {
                    if (in.op != Opcode::HeapAlloc && in.op != Opcode::HeapFree) continue;
                    const PartitionLabel l = resolve_allocation_partition(b.lowered.module, {fn.name, in.id});
                    const auto* out = allocs.find_function(fn.name)->find_instruction(in.id);
                    REQUIRE(out);
                    CHECK(out->op == (in.op == Opcode::HeapAlloc ? Opcode::PartitionAlloc : Opcode::PartitionFree));
                    CHECK(out->key == *b.keys.key_of(l));
                }
            }
        }
    }
}

TEST_CASE("multiple partitions stop instrumentation") {
    const auto lowered = lower_to_ir(parse_program(test::data_text("phi_alloc.pml"), "phi_alloc.pml"));
    const auto keys = map_partitions_to_keys(lowered.policy.partitions);
    try {
        (void)instrument_module(lowered.module, lowered.policy, keys);
        FAIL("instrumented");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::MultiplePartitions);
    }
}

TEST_CASE("no indirect flow leaves the module unchanged") {
    const auto s = test::build_data("signing.pml");
    CHECK(instrument_indirect(s.source_ir, s.policy) == s.source_ir);
}

TEST_CASE("registration dominates address-taking in loops") {
    const auto b = build(R"(#unit a
#pragma partition 0 rw
global slot: int;
fn main(input, len) {
    let i: int = 0;
    while (i < 3) {
        if (i == 1) {
            slot = &g;
        }
        let f: int = &g;
        f(i);
        i = i + 1;
    }
    return 0;
}
#unit b
#pragma partition 1 rw
fn g(x) { return x; }
)");
    const auto& fn = *b.inst.ir.find_function("main");
    const auto dom = dominators(fn);
    int checked = 0;
    for (const auto& blk : fn.blocks) {
        for (size_t i = 0; i < blk.instructions.size(); ++i) {
            const auto& in = blk.instructions[i];
            if (in.op != Opcode::TakeFnAddr) continue;
            bool dominated = false;
            for (size_t j = 0; j < i; ++j) {
                const auto& prev = blk.instructions[j];
                dominated = dominated || (prev.op == Opcode::RegisterAtFn && prev.symbol == in.symbol);
            }
            for (const auto& other : fn.blocks) {
                if (other.id == blk.id || !dom.at(blk.id).count(other.id)) continue;
                for (const auto& prev : other.instructions) {
                    dominated = dominated || (prev.op == Opcode::RegisterAtFn && prev.symbol == in.symbol);
                }
            }
            CHECK(dominated);
            ++checked;
        }
    }
    CHECK(checked == 2);
}
