#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace partc {

enum class EventKind { Switch, Load, Store, Call, Return, Alloc, Free, Register, Fault };

std::string_view to_string(EventKind kind);
std::optional<EventKind> parse_event_kind(std::string_view text);

/// One trace line: `seq Kind key=value ...`. Field order is fixed by the
/// producer and preserved by the parser.
struct TraceEvent {
    uint64_t seq = 0;
    EventKind kind = EventKind::Switch;
    std::vector<std::pair<std::string, std::string>> fields;

    [[nodiscard]] const std::string* field(std::string_view name) const;
    [[nodiscard]] std::string get(std::string_view name) const;
    [[nodiscard]] std::string to_line() const;

    friend bool operator==(const TraceEvent&, const TraceEvent&) = default;
};

struct Trace {
    std::vector<TraceEvent> events;

    TraceEvent& append(EventKind kind);
    [[nodiscard]] std::string to_text() const;

    friend bool operator==(const Trace&, const Trace&) = default;
};

/// Throws FormatError on malformed lines or non-increasing sequence numbers.
Trace parse_trace(std::string_view text);

struct TraceStats {
    uint64_t wrpkru_count = 0;
    uint64_t dynamic_switches = 0;
    uint64_t fault_count = 0;
    uint64_t alloc_count = 0;
    uint64_t free_count = 0;
    uint64_t alloc_bytes = 0;
    uint64_t free_bytes = 0;
    uint64_t loads = 0;
    uint64_t stores = 0;
    uint64_t calls = 0;
    /// (from, to) partition labels to number of switches.
    std::map<std::pair<std::string, std::string>, uint64_t> switch_matrix;

    [[nodiscard]] std::string to_text() const;
};

TraceStats compute_stats(const Trace& trace);

struct RestorationReport {
    uint64_t checked_calls = 0;
    uint64_t checked_scopes = 0;
    std::vector<std::string> violations;

    [[nodiscard]] bool ok() const { return violations.empty(); }
};

/// Checks from Switch, Call and Return events alone that the PKRU image
/// after every scope exit and every return equals the image before entry.
RestorationReport check_restoration(const Trace& trace);

} // namespace partc
