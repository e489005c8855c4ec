#include "partc/trace.hpp"

#include <charconv>

#include "partc/error.hpp"

namespace partc {

namespace {

constexpr EventKind kAllKinds[] = {EventKind::Switch, EventKind::Load,     EventKind::Store,
                                   EventKind::Call,   EventKind::Return,   EventKind::Alloc,
                                   EventKind::Free,   EventKind::Register, EventKind::Fault};

uint64_t parse_u64(std::string_view text, int base = 10) {
    if (base == 16 && text.size() > 2 && text[0] == '0' && text[1] == 'x') text.remove_prefix(2);
    uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v, base);
    if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) {
        throw Error(ErrorCode::FormatError, "trace: bad number '" + std::string(text) + "'");
    }
    return v;
}

bool is_dynamic(const std::string& reason) { return reason == "dynamic_enter" || reason == "dynamic_exit"; }

} // namespace

std::string_view to_string(EventKind kind) {
    switch (kind) {
    case EventKind::Switch: return "Switch";
    case EventKind::Load: return "Load";
    case EventKind::Store: return "Store";
    case EventKind::Call: return "Call";
    case EventKind::Return: return "Return";
    case EventKind::Alloc: return "Alloc";
    case EventKind::Free: return "Free";
    case EventKind::Register: return "Register";
    case EventKind::Fault: return "Fault";
    }
    return "?";
}

std::optional<EventKind> parse_event_kind(std::string_view text) {
    for (EventKind k : kAllKinds) {
        if (to_string(k) == text) return k;
    }
    return std::nullopt;
}

const std::string* TraceEvent::field(std::string_view name) const {
    for (const auto& [k, v] : fields) {
        if (k == name) return &v;
    }
    return nullptr;
}

std::string TraceEvent::get(std::string_view name) const {
    const std::string* v = field(name);
    return v != nullptr ? *v : std::string();
}

std::string TraceEvent::to_line() const {
    std::string out = std::to_string(seq) + " " + std::string(to_string(kind));
    for (const auto& [k, v] : fields) out += " " + k + "=" + v;
    return out;
}

TraceEvent& Trace::append(EventKind kind) {
    TraceEvent e;
    e.seq = events.empty() ? 1 : events.back().seq + 1;
    e.kind = kind;
    events.push_back(std::move(e));
    return events.back();
}

std::string Trace::to_text() const {
    std::string out;
    for (const auto& e : events) {
        out += e.to_line();
        out += '\n';
    }
    return out;
}

Trace parse_trace(std::string_view text) {
    Trace trace;
    size_t line_no = 0;
    while (!text.empty()) {
        size_t nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view() : text.substr(nl + 1);
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) continue;

        std::vector<std::string_view> words;
        size_t pos = 0;
        while (pos < line.size()) {
            size_t sp = line.find(' ', pos);
            if (sp == std::string_view::npos) sp = line.size();
            if (sp > pos) words.push_back(line.substr(pos, sp - pos));
            pos = sp + 1;
        }
        const std::string where = "trace line " + std::to_string(line_no);
        if (words.size() < 2) throw Error(ErrorCode::FormatError, where + ": expected 'seq Kind ...'");
        TraceEvent e;
        try {
            e.seq = parse_u64(words[0]);
        } catch (const Error&) {
            throw Error(ErrorCode::FormatError, where + ": bad sequence number");
        }
        auto kind = parse_event_kind(words[1]);
        if (!kind) throw Error(ErrorCode::FormatError, where + ": unknown event kind '" + std::string(words[1]) + "'");
        e.kind = *kind;
        for (size_t i = 2; i < words.size(); ++i) {
            size_t eq = words[i].find('=');
            if (eq == std::string_view::npos || eq == 0) {
                throw Error(ErrorCode::FormatError, where + ": expected key=value, found '" + std::string(words[i]) + "'");
            }
            e.fields.emplace_back(std::string(words[i].substr(0, eq)), std::string(words[i].substr(eq + 1)));
        }
        if (!trace.events.empty() && e.seq <= trace.events.back().seq) {
            throw Error(ErrorCode::FormatError, where + ": sequence numbers must increase");
        }
        trace.events.push_back(std::move(e));
    }
    return trace;
}

TraceStats compute_stats(const Trace& trace) {
    TraceStats s;
    for (const auto& e : trace.events) {
        switch (e.kind) {
        case EventKind::Switch:
            ++s.wrpkru_count;
            if (is_dynamic(e.get("reason"))) ++s.dynamic_switches;
            ++s.switch_matrix[{e.get("from"), e.get("to")}];
            break;
        case EventKind::Fault:
            ++s.fault_count;
            break;
        case EventKind::Alloc:
            ++s.alloc_count;
            if (const auto* size = e.field("size")) s.alloc_bytes += parse_u64(*size);
            break;
        case EventKind::Free:
            ++s.free_count;
            if (const auto* size = e.field("size")) s.free_bytes += parse_u64(*size);
            break;
        case EventKind::Load:
            ++s.loads;
            break;
        case EventKind::Store:
            ++s.stores;
            break;
        case EventKind::Call:
            ++s.calls;
            break;
        default:
            break;
        }
    }
    return s;
}

std::string TraceStats::to_text() const {
    std::string out;
    out += "wrpkru_count " + std::to_string(wrpkru_count) + "\n";
    out += "dynamic_switches " + std::to_string(dynamic_switches) + "\n";
    out += "fault_count " + std::to_string(fault_count) + "\n";
    out += "alloc_count " + std::to_string(alloc_count) + " bytes " + std::to_string(alloc_bytes) + "\n";
    out += "free_count " + std::to_string(free_count) + " bytes " + std::to_string(free_bytes) + "\n";
    out += "loads " + std::to_string(loads) + "\n";
    out += "stores " + std::to_string(stores) + "\n";
    out += "calls " + std::to_string(calls) + "\n";
    out += "switch_matrix\n";
    for (const auto& [pair, n] : switch_matrix) {
        out += "  " + pair.first + " -> " + pair.second + " " + std::to_string(n) + "\n";
    }
    return out;
}

RestorationReport check_restoration(const Trace& trace) {
    RestorationReport report;
    std::string current;
    for (const auto& e : trace.events) {
        if (e.kind == EventKind::Switch) {
            current = e.get("before");
            break;
        }
    }

    struct Entry {
        bool is_call = false;
        std::string pre;
        uint64_t seq = 0;
    };
    std::vector<Entry> stack;
    std::optional<std::string> pending_pre;
    std::optional<Entry> awaiting;

    auto settle = [&](uint64_t seq) {
        if (!awaiting) return;
        if (current != awaiting->pre) {
            report.violations.push_back("return before event " + std::to_string(seq) + " left PKRU " + current +
                                        ", expected " + awaiting->pre + " (call at " +
                                        std::to_string(awaiting->seq) + ")");
        }
        awaiting.reset();
    };

    for (const auto& e : trace.events) {
        const std::string reason = e.kind == EventKind::Switch ? e.get("reason") : std::string();
        const bool exit_switch = reason == "call_exit" || reason == "dynamic_exit";
        if (awaiting && !exit_switch) settle(e.seq);
        switch (e.kind) {
        case EventKind::Switch: {
            if (e.get("before") != current) {
                report.violations.push_back("switch " + std::to_string(e.seq) + " starts from " + e.get("before") +
                                            " but PKRU was " + current);
            }
            if (reason == "call_enter" || reason == "dynamic_enter") pending_pre = current;
            if (reason == "scope_enter") stack.push_back({false, current, e.seq});
            current = e.get("after");
            if (reason == "scope_exit") {
                if (stack.empty() || stack.back().is_call) {
                    report.violations.push_back("scope exit " + std::to_string(e.seq) + " has no matching entry");
                } else {
                    ++report.checked_scopes;
                    if (current != stack.back().pre) {
                        report.violations.push_back("scope exit " + std::to_string(e.seq) + " left PKRU " + current +
                                                    ", expected " + stack.back().pre);
                    }
                    stack.pop_back();
                }
            }
            if (exit_switch) settle(e.seq);
            break;
        }
        case EventKind::Call:
            stack.push_back({true, pending_pre.value_or(current), e.seq});
            pending_pre.reset();
            break;
        case EventKind::Return:
            if (stack.empty() || !stack.back().is_call) {
                report.violations.push_back("return " + std::to_string(e.seq) + " has no matching call");
            } else {
                ++report.checked_calls;
                awaiting = stack.back();
                stack.pop_back();
            }
            break;
        default:
            break;
        }
        if (e.kind == EventKind::Fault) break;
    }
    if (awaiting) settle(trace.events.empty() ? 0 : trace.events.back().seq + 1);
    return report;
}

} // namespace partc
