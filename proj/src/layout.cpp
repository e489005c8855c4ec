#include "partc/layout.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>

#include <json.hpp>

namespace partc {

namespace {

uint64_t round_up(uint64_t value, uint64_t align) { return (value + align - 1) / align * align; }

std::string hex(uint64_t value) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "0x%llx", static_cast<unsigned long long>(value));
    return buf;
}

uint64_t parse_hex_field(const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || !j[key].is_string()) {
        throw Error(ErrorCode::FormatError, std::string("layout: '") + key + "' must be a hex string");
    }
    const std::string s = j[key].get<std::string>();
    uint64_t v = 0;
    if (s.size() < 3 || s[0] != '0' || (s[1] != 'x' && s[1] != 'X')) {
        throw Error(ErrorCode::FormatError, "layout: bad hex value '" + s + "'");
    }
    auto [ptr, ec] = std::from_chars(s.data() + 2, s.data() + s.size(), v, 16);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw Error(ErrorCode::FormatError, "layout: bad hex value '" + s + "'");
    }
    return v;
}

} // namespace

std::string_view to_string(RegionKind kind) {
    switch (kind) {
    case RegionKind::Runtime: return "runtime";
    case RegionKind::Globals: return "globals";
    case RegionKind::Rodata: return "rodata";
    case RegionKind::Heap: return "heap";
    }
    return "?";
}

std::optional<RegionKind> parse_region_kind(std::string_view text) {
    for (RegionKind k : {RegionKind::Runtime, RegionKind::Globals, RegionKind::Rodata, RegionKind::Heap}) {
        if (to_string(k) == text) return k;
    }
    return std::nullopt;
}

const Region* LayoutPlan::find_region(uint64_t address) const {
    for (const auto& r : regions) {
        if (r.contains(address)) return &r;
    }
    return nullptr;
}

const Region* LayoutPlan::region_of(PartitionLabel partition, RegionKind kind) const {
    for (const auto& r : regions) {
        if (r.partition == partition && r.kind == kind) return &r;
    }
    return nullptr;
}

const SymbolPlacement* LayoutPlan::symbol(std::string_view name) const {
    for (const auto& s : symbols) {
        if (s.name == name) return &s;
    }
    return nullptr;
}

LayoutPlan assign_sections(const ir::Module& module, const KeyAssignment& keys) {
    LayoutPlan plan;
    plan.regions.push_back({std::nullopt, kRuntimeKey, RegionKind::Runtime, kRuntimeBase, kPageSize});

    std::vector<PartitionLabel> labels;
    for (const auto& p : module.partitions) labels.push_back(p.label);
    std::sort(labels.begin(), labels.end());

    uint64_t cursor = kPartitionBase;
    for (PartitionLabel label : labels) {
        auto key = keys.key_of(label);
        if (!key) throw Error(ErrorCode::UnknownPartition, "partition " + std::to_string(label) + " has no key");
        for (RegionKind kind : {RegionKind::Globals, RegionKind::Rodata}) {
            const bool want_const = kind == RegionKind::Rodata;
            uint64_t offset = 0;
            for (const auto& g : module.globals) {
                if (g.md.partition_label != label || g.immutable != want_const) continue;
                offset = round_up(offset, kGlobalAlign);
                plan.symbols.push_back({g.id.name, label, cursor + offset, g.size});
                offset += g.size;
            }
            const uint64_t length = std::max(round_up(offset, kPageSize), kPageSize);
            plan.regions.push_back({label, *key, kind, cursor, length});
            cursor += length;
        }
        plan.regions.push_back({label, *key, RegionKind::Heap, cursor, kHeapPages * kPageSize});
        cursor += kHeapPages * kPageSize;
    }
    // Symbols were produced partition by partition; report them in declaration order.
    std::vector<SymbolPlacement> ordered;
    for (const auto& g : module.globals) ordered.push_back(*plan.symbol(g.id.name));
    plan.symbols = std::move(ordered);
    return plan;
}

void check_layout(const LayoutPlan& plan) {
    if (plan.page_size == 0 || (plan.page_size & (plan.page_size - 1)) != 0) {
        throw Error(ErrorCode::LayoutOverlap, "page size " + std::to_string(plan.page_size) + " is not a power of two");
    }
    for (size_t i = 0; i < plan.regions.size(); ++i) {
        const Region& a = plan.regions[i];
        if (a.base % plan.page_size != 0 || a.length % plan.page_size != 0 || a.length == 0) {
            throw Error(ErrorCode::LayoutOverlap, "region at " + hex(a.base) + " is not page-aligned");
        }
        for (size_t j = i + 1; j < plan.regions.size(); ++j) {
            const Region& b = plan.regions[j];
            if (a.base < b.end() && b.base < a.end()) {
                throw Error(ErrorCode::LayoutOverlap,
                            "regions at " + hex(a.base) + " and " + hex(b.base) + " overlap");
            }
        }
    }
    for (const auto& s : plan.symbols) {
        const Region* r = plan.find_region(s.address);
        if (r == nullptr || r->partition != s.partition || s.address + s.size > r->end() ||
            (r->kind != RegionKind::Globals && r->kind != RegionKind::Rodata)) {
            throw Error(ErrorCode::LayoutOverlap, "symbol '" + s.name + "' lies outside its partition's data");
        }
    }
}

std::string emit_layout(const LayoutPlan& plan) {
    std::vector<Region> regions = plan.regions;
    std::stable_sort(regions.begin(), regions.end(),
                     [](const Region& a, const Region& b) { return a.base < b.base; });
    nlohmann::ordered_json j;
    j["page_size"] = plan.page_size;
    j["regions"] = nlohmann::ordered_json::array();
    for (const auto& r : regions) {
        nlohmann::ordered_json e;
        e["partition"] = r.partition ? nlohmann::ordered_json(*r.partition) : nlohmann::ordered_json(nullptr);
        e["key"] = r.key;
        e["kind"] = std::string(to_string(r.kind));
        e["base"] = hex(r.base);
        e["length"] = hex(r.length);
        j["regions"].push_back(std::move(e));
    }
    j["symbols"] = nlohmann::ordered_json::array();
    for (const auto& s : plan.symbols) {
        nlohmann::ordered_json e;
        e["name"] = s.name;
        e["partition"] = s.partition;
        e["address"] = hex(s.address);
        e["size"] = hex(s.size);
        j["symbols"].push_back(std::move(e));
    }
    return j.dump(2) + "\n";
}

LayoutPlan parse_layout(std::string_view text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::FormatError, std::string("layout: ") + e.what());
    }
    LayoutPlan plan;
    try {
        plan.page_size = j.at("page_size").get<uint64_t>();
        for (const auto& e : j.at("regions")) {
            Region r;
            if (!e.at("partition").is_null()) r.partition = e.at("partition").get<PartitionLabel>();
            r.key = e.at("key").get<ProtectionKey>();
            auto kind = parse_region_kind(e.at("kind").get<std::string>());
            if (!kind) throw Error(ErrorCode::FormatError, "layout: unknown region kind");
            r.kind = *kind;
            r.base = parse_hex_field(e, "base");
            r.length = parse_hex_field(e, "length");
            if (r.key >= kProtectionKeyCount) throw Error(ErrorCode::FormatError, "layout: key out of range");
            plan.regions.push_back(r);
        }
        if (j.contains("symbols")) {
            for (const auto& e : j.at("symbols")) {
                SymbolPlacement s;
                s.name = e.at("name").get<std::string>();
                s.partition = e.at("partition").get<PartitionLabel>();
                s.address = parse_hex_field(e, "address");
                s.size = parse_hex_field(e, "size");
                plan.symbols.push_back(std::move(s));
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::FormatError, std::string("layout: ") + e.what());
    }
    check_layout(plan);
    return plan;
}

} // namespace partc
