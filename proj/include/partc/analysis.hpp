#pragma once

#include <string>
#include <vector>

#include "partc/ir.hpp"

namespace partc {

/// Partition of the memory a heap_alloc or heap_free site operates on,
/// found by following SSA def-use chains to annotated declarations. Falls
/// back to the function's home partition when no declaration is reached.
/// Throws MultiplePartitions when declarations in different partitions are
/// reached and SemanticError when the site is not an allocation operation.
PartitionLabel resolve_allocation_partition(const ir::Module& module, const ir::InstrRef& site);

struct AddressTakenSite {
    ir::InstrRef site;
    std::string target;

    friend bool operator==(const AddressTakenSite&, const AddressTakenSite&) = default;
    friend auto operator<=>(const AddressTakenSite&, const AddressTakenSite&) = default;
};

/// Every take_fn_addr instruction with its target, in module order.
std::vector<AddressTakenSite> find_address_taken(const ir::Module& module);

} // namespace partc
