#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "partc/ir.hpp"
#include "partc/policy.hpp"

namespace partc {

inline constexpr uint64_t kPageSize = 4096;
inline constexpr uint64_t kRuntimeBase = 0x10000;
inline constexpr uint64_t kPartitionBase = 0x100000;
inline constexpr uint64_t kHeapPages = 16;
inline constexpr uint64_t kGlobalAlign = 16;

enum class RegionKind { Runtime, Globals, Rodata, Heap };

std::string_view to_string(RegionKind kind);
std::optional<RegionKind> parse_region_kind(std::string_view text);

struct Region {
    /// Empty for the runtime region.
    std::optional<PartitionLabel> partition;
    ProtectionKey key = kRuntimeKey;
    RegionKind kind = RegionKind::Runtime;
    uint64_t base = 0;
    uint64_t length = 0;

    [[nodiscard]] uint64_t end() const { return base + length; }
    [[nodiscard]] bool contains(uint64_t address) const { return address >= base && address < end(); }
    [[nodiscard]] bool writable() const { return kind != RegionKind::Rodata; }

    friend bool operator==(const Region&, const Region&) = default;
};

struct SymbolPlacement {
    std::string name;
    PartitionLabel partition = 0;
    uint64_t address = 0;
    uint64_t size = 0;

    friend bool operator==(const SymbolPlacement&, const SymbolPlacement&) = default;
};

struct LayoutPlan {
    uint64_t page_size = kPageSize;
    /// Sorted by base address.
    std::vector<Region> regions;
    /// Globals in declaration order.
    std::vector<SymbolPlacement> symbols;

    [[nodiscard]] const Region* find_region(uint64_t address) const;
    [[nodiscard]] const Region* region_of(PartitionLabel partition, RegionKind kind) const;
    [[nodiscard]] const SymbolPlacement* symbol(std::string_view name) const;

    friend bool operator==(const LayoutPlan&, const LayoutPlan&) = default;
};

/// Places every global in its partition's globals (or, if const, rodata)
/// region and reserves one heap region per partition. Regions are laid out
/// by ascending partition label after the runtime region.
LayoutPlan assign_sections(const ir::Module& module, const KeyAssignment& keys);

/// Throws LayoutOverlap when regions intersect or are not page-aligned, and
/// when a symbol escapes its region.
void check_layout(const LayoutPlan& plan);

/// Deterministic JSON text; regions sorted by base address.
std::string emit_layout(const LayoutPlan& plan);
/// Throws FormatError on malformed input and LayoutOverlap on bad geometry.
LayoutPlan parse_layout(std::string_view text);

} // namespace partc
