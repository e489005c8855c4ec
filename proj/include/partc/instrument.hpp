#pragma once

#include <cstdint>

#include "partc/ir.hpp"
#include "partc/layout.hpp"
#include "partc/policy.hpp"

namespace partc {

struct InstrumentedModule {
    ir::Module ir;
    /// set_privileges injected around direct calls: two per returning
    /// cross-partition call, one per noreturn one.
    uint32_t switch_site_count = 0;
};

/// Brackets direct calls whose callee rights vector differs from the
/// caller's with set_privileges. Identical vectors are left alone.
InstrumentedModule instrument_direct_calls(const ir::Module& module, const Policy& policy);

/// Replaces refinement scope markers with set_privileges carrying the
/// vector inside the scope on entry and the enclosing vector on exit.
ir::Module instrument_refinements(const ir::Module& module, const Policy& policy);

/// Precedes each take_fn_addr with register_at_fn and each call_indirect
/// with set_privileges_dynamic; restores the caller's vector afterwards.
ir::Module instrument_indirect(const ir::Module& module, const Policy& policy);

/// Rewrites heap_alloc/heap_free to partition_alloc/partition_free on the
/// key of the resolved partition. Propagates MultiplePartitions.
ir::Module instrument_allocations(const ir::Module& module, const KeyAssignment& keys);

/// All passes in order: allocations, refinements, indirect flow, direct calls.
InstrumentedModule instrument_module(const ir::Module& module, const Policy& policy, const KeyAssignment& keys);

} // namespace partc
