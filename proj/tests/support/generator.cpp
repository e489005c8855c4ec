#include "generator.hpp"

#include <algorithm>
#include <random>

namespace partc::testgen {

namespace {

enum class GlobalKind { Int, ConstInt, Bytes, ConstBytes, Ptr, FnSlot };

struct GlobalInfo {
    std::string name;
    GlobalKind kind = GlobalKind::Int;
    uint32_t size = 8;
};

struct FnInfo {
    std::string name;
    size_t unit = 0;
    uint32_t params = 0;
    bool noreturn = false;
};

enum class LocalKind { Int, Counter };

struct Local {
    std::string name;
    LocalKind kind = LocalKind::Int;
};

class Generator {
  public:
    Generator(uint64_t seed, const GeneratorOptions& options) : rng_(seed), opt_(options) { result_.seed = seed; }

    GeneratedProgram run() {
        plan();
        for (size_t u = 0; u < labels_.size(); ++u) emit_unit(u);
        const size_t len = pick(9);
        for (size_t i = 0; i < len; ++i) result_.input.push_back(static_cast<uint8_t>(pick(256)));
        result_.partitions = static_cast<uint32_t>(labels_.size());
        return std::move(result_);
    }

  private:
    size_t pick(size_t n) { return n == 0 ? 0 : std::uniform_int_distribution<size_t>(0, n - 1)(rng_); }
    bool chance(double p) { return std::bernoulli_distribution(p)(rng_); }
    template <typename T>
    const T& choose(const std::vector<T>& v) {
        return v[pick(v.size())];
    }

    std::string label() { return std::to_string(choose(labels_)); }

    std::string code_rights() {
        if (opt_.allow_invalid_rights && chance(0.1)) return "w";
        const size_t r = pick(20);
        if (r < 17) return "rw";
        if (r < 19) return "r";
        return "none";
    }

    std::string refine_rights() {
        if (opt_.allow_invalid_rights && chance(0.1)) return "w";
        const size_t r = pick(10);
        if (r < 5) return "rw";
        if (r < 9) return "r";
        return "none";
    }

    void plan() {
        const size_t n = 1 + pick(opt_.max_partitions);
        std::vector<uint32_t> pool{0, 1, 2, 3, 4, 5, 6, 7};
        std::shuffle(pool.begin(), pool.end(), rng_);
        labels_.assign(pool.begin(), pool.begin() + static_cast<long>(n));

        globals_.resize(n);
        for (size_t u = 0; u < n; ++u) {
            globals_[u].push_back({"g" + std::to_string(u) + "a", GlobalKind::Int, 8});
            if (chance(0.5)) globals_[u].push_back({"g" + std::to_string(u) + "b", GlobalKind::Int, 8});
            if (chance(0.3)) globals_[u].push_back({"k" + std::to_string(u), GlobalKind::ConstInt, 8});
            globals_[u].push_back({"arr" + std::to_string(u), GlobalKind::Bytes, 16});
            if (chance(0.4)) globals_[u].push_back({"c" + std::to_string(u), GlobalKind::ConstBytes, 8});
            globals_[u].push_back({"hp" + std::to_string(u), GlobalKind::Ptr, 8});
            globals_[u].push_back({"gp" + std::to_string(u), GlobalKind::Ptr, 8});
        }
        globals_[0].push_back({"fpg", GlobalKind::FnSlot, 8});

        const size_t fcount = 2 + pick(std::max<uint32_t>(opt_.max_functions, 2) - 1);
        functions_.push_back({"main", 0, 2, false});
        for (size_t i = 1; i < fcount; ++i) {
            functions_.push_back({"f" + std::to_string(i), pick(n), static_cast<uint32_t>(pick(3)), chance(0.1)});
        }
    }

    /// Globals of one kind; usually those of the current unit so that most
    /// accesses stay inside the home partition.
    std::vector<const GlobalInfo*> globals_of(GlobalKind kind) {
        std::vector<const GlobalInfo*> local;
        std::vector<const GlobalInfo*> all;
        for (size_t u = 0; u < globals_.size(); ++u) {
            for (const auto& g : globals_[u]) {
                if (g.kind != kind) continue;
                all.push_back(&g);
                if (u == functions_[current_].unit) local.push_back(&g);
            }
        }
        if (!local.empty() && chance(0.75)) return local;
        return all;
    }

    void emit_unit(size_t u) {
        std::string& out = result_.source;
        out += "#unit u" + std::to_string(u) + "\n";
        out += "#pragma partition " + std::to_string(labels_[u]) + " " + code_rights() + "\n";
        out += "#pragma partition_name " + std::to_string(labels_[u]) + " p" + std::to_string(labels_[u]) + "\n";
        for (const auto& g : globals_[u]) {
            std::string attr;
            if (g.kind != GlobalKind::FnSlot && chance(0.2)) attr = "[[partition(" + label() + ", rw)]] ";
            switch (g.kind) {
            case GlobalKind::Int:
                out += attr + "global " + g.name + ": int = " + std::to_string(pick(100)) + ";\n";
                break;
            case GlobalKind::ConstInt:
                out += attr + "const global " + g.name + ": int = " + std::to_string(pick(100)) + ";\n";
                break;
            case GlobalKind::Bytes: out += attr + "global " + g.name + ": bytes[16];\n"; break;
            case GlobalKind::ConstBytes: out += attr + "const global " + g.name + ": bytes[8] = \"abcdefgh\";\n"; break;
            case GlobalKind::Ptr: out += attr + "global " + g.name + ": ptr;\n"; break;
            case GlobalKind::FnSlot: out += "global " + g.name + ": int;\n"; break;
            }
        }
        for (size_t i = 0; i < functions_.size(); ++i) {
            if (functions_[i].unit == u) emit_function(i);
        }
    }

    void emit_function(size_t index) {
        const FnInfo& fn = functions_[index];
        current_ = index;
        scopes_.assign(1, {});
        params_.clear();
        std::string& out = result_.source;
        if (index != 0 && chance(0.15)) out += "[[privilege(" + label() + ", " + refine_rights() + ")]]\n";
        if (fn.noreturn) out += "noreturn ";
        out += "fn " + fn.name + "(";
        if (index == 0) {
            out += "input, len";
            params_.push_back("len");
        } else {
            for (uint32_t p = 0; p < fn.params; ++p) {
                if (p) out += ", ";
                out += "a" + std::to_string(p);
                params_.push_back("a" + std::to_string(p));
            }
        }
        out += ") {\n";
        const size_t count = 1 + pick(opt_.max_statements);
        for (size_t s = 0; s < count; ++s) statement(out, 1, 0);
        if (fn.noreturn) {
            out += "    halt;\n";
        } else if (index == 0 && chance(0.1)) {
            out += "    halt;\n";
        } else if (chance(0.8)) {
            out += "    return " + int_expr(0) + ";\n";
        }
        out += "}\n";
    }

    std::string fresh(const char* prefix) { return prefix + std::to_string(next_name_++); }

    std::vector<const Local*> int_locals() const {
        std::vector<const Local*> out;
        for (const auto& scope : scopes_) {
            for (const auto& l : scope) {
                if (l.kind == LocalKind::Int) out.push_back(&l);
            }
        }
        return out;
    }

    std::string int_expr(int depth) {
        const size_t r = pick(100);
        if (r < 25) return std::to_string(pick(10));
        if (r < 45) {
            auto locals = int_locals();
            if (!locals.empty()) return choose(locals)->name;
            return std::to_string(pick(10));
        }
        if (r < 55 && !params_.empty()) return choose(params_);
        if (r < 75) {
            auto ints = globals_of(GlobalKind::Int);
            auto consts = globals_of(GlobalKind::ConstInt);
            ints.insert(ints.end(), consts.begin(), consts.end());
            return choose(ints)->name;
        }
        if (r < 88) {
            auto arrays = globals_of(GlobalKind::Bytes);
            auto consts = globals_of(GlobalKind::ConstBytes);
            if (!consts.empty() && chance(0.3)) return choose(consts)->name + "[" + std::to_string(pick(8)) + "]";
            return choose(arrays)->name + "[" + std::to_string(pick(16)) + "]";
        }
        if (depth == 0) {
            static const char* kOps[] = {"+", "-", "*", "&", "^", "|"};
            return "(" + int_expr(1) + " " + kOps[pick(6)] + " " + int_expr(1) + ")";
        }
        return std::to_string(pick(10));
    }

    std::string condition() {
        static const char* kCmp[] = {"<", ">", "==", "!="};
        return int_expr(1) + " " + kCmp[pick(4)] + " " + std::to_string(pick(10));
    }

    std::string call_args(uint32_t n) {
        std::string out;
        for (uint32_t i = 0; i < n; ++i) {
            if (i) out += ", ";
            out += int_expr(1);
        }
        return out;
    }

    std::string int_target() {
        auto locals = int_locals();
        if (!locals.empty() && chance(0.7)) return choose(locals)->name;
        return "";
    }

    void declare(const std::string& name, LocalKind kind) { scopes_.back().push_back({name, kind}); }

    void block(std::string& out, int indent, int depth, size_t max_count) {
        scopes_.emplace_back();
        const size_t count = 1 + pick(max_count);
        for (size_t i = 0; i < count; ++i) statement(out, indent, depth);
        scopes_.pop_back();
    }

    void statement(std::string& out, int indent, int depth) {
        const std::string pad(static_cast<size_t>(indent) * 4, ' ');
        const bool nested_ok = depth < static_cast<int>(opt_.max_depth);
        const bool is_main = current_ == 0;
        const bool has_callee = current_ + 1 < functions_.size();
        const bool noreturn = functions_[current_].noreturn;
        for (;;) {
            switch (pick(22)) {
            case 0:
            case 1: {
                const std::string name = fresh("l");
                out += pad + "let " + name + ": int = " + int_expr(0) + ";\n";
                declare(name, LocalKind::Int);
                return;
            }
            case 2: {
                const std::string t = int_target();
                if (t.empty()) continue;
                out += pad + t + " = " + int_expr(0) + ";\n";
                return;
            }
            case 3:
            case 4: {
                auto targets = globals_of(GlobalKind::Int);
                if (chance(0.1)) {
                    auto consts = globals_of(GlobalKind::ConstInt);
                    if (!consts.empty()) targets = consts;
                }
                out += pad + choose(targets)->name + " = " + int_expr(0) + ";\n";
                return;
            }
            case 5: {
                auto consts = globals_of(GlobalKind::ConstBytes);
                if (!consts.empty() && chance(0.15)) {
                    out += pad + choose(consts)->name + "[" + std::to_string(pick(8)) + "] = " + int_expr(1) + ";\n";
                } else {
                    out += pad + choose(globals_of(GlobalKind::Bytes))->name + "[" + std::to_string(pick(16)) +
                           "] = " + int_expr(1) + ";\n";
                }
                return;
            }
            case 6:
            case 7: {
                if (!has_callee) continue;
                const size_t j = current_ + 1 + pick(functions_.size() - current_ - 1);
                const FnInfo& callee = functions_[j];
                const std::string t = callee.noreturn ? "" : int_target();
                out += pad + (t.empty() ? "" : t + " = ") + callee.name + "(" + call_args(callee.params) + ");\n";
                return;
            }
            case 8: {
                if (!has_callee) continue;
                const size_t j = current_ + 1 + pick(functions_.size() - current_ - 1);
                const FnInfo& callee = functions_[j];
                const std::string fp = fresh("fp");
                out += pad + "let " + fp + ": int = &" + callee.name + ";\n";
                const std::string t = callee.noreturn ? "" : int_target();
                out += pad + (t.empty() ? "" : t + " = ") + fp + "(" + call_args(callee.params) + ");\n";
                return;
            }
            case 9: {
                if (!chance(0.25)) continue;
                const std::string fp = fresh("fp");
                const std::string forged = chance(0.5) ? "1073741824" : std::to_string(pick(64));
                out += pad + "let " + fp + ": int = " + forged + ";\n";
                out += pad + fp + "(" + call_args(static_cast<uint32_t>(pick(2))) + ");\n";
                return;
            }
            case 10: {
                if (functions_.size() < 2) continue;
                const size_t j = 1 + pick(functions_.size() - 1);
                out += pad + "fpg = &" + functions_[j].name + ";\n";
                return;
            }
            case 11: {
                if (!is_main) continue;
                out += pad + "fpg(" + call_args(static_cast<uint32_t>(pick(3))) + ");\n";
                return;
            }
            case 12:
            case 13: {
                if (!nested_ok) continue;
                out += pad + "[[privilege(" + label() + ", " + refine_rights() + ")]] {\n";
                block(out, indent + 1, depth + 1, 2);
                out += pad + "}\n";
                return;
            }
            case 14: {
                if (!nested_ok) continue;
                out += pad + "if (" + condition() + ") {\n";
                block(out, indent + 1, depth + 1, 2);
                if (chance(0.5)) {
                    out += pad + "} else {\n";
                    block(out, indent + 1, depth + 1, 2);
                }
                out += pad + "}\n";
                return;
            }
            case 15: {
                if (!nested_ok || !chance(0.5)) continue;
                const std::string w = fresh("w");
                out += pad + "let " + w + ": int = 0;\n";
                declare(w, LocalKind::Counter);
                out += pad + "while (" + w + " < " + std::to_string(1 + pick(3)) + ") {\n";
                block(out, indent + 1, depth + 1, 1);
                out += pad + "    " + w + " = " + w + " + 1;\n";
                out += pad + "}\n";
                return;
            }
            case 16: {
                if (depth == 0) continue;
                if (noreturn) {
                    out += pad + "halt;\n";
                } else {
                    out += pad + "return " + int_expr(1) + ";\n";
                }
                return;
            }
            case 17: {
                heap_local(out, pad);
                return;
            }
            case 18: {
                const size_t u = pick(labels_.size());
                const std::string hp = "hp" + std::to_string(u);
                if (chance(0.3)) {
                    const std::string q = fresh("q");
                    out += pad + "[[partition(" + label() + ", rw)]] let " + q + ": ptr = alloc(16);\n";
                    out += pad + hp + " = " + q + ";\n";
                } else {
                    out += pad + hp + " = alloc(16);\n";
                    out += pad + hp + "[" + std::to_string(pick(16)) + "] = " + int_expr(1) + ";\n";
                }
                out += pad + "free(" + hp + ");\n";
                out += pad + hp + " = 0;\n";
                return;
            }
            case 19: {
                auto locals = int_locals();
                if (locals.empty()) continue;
                const std::string r = fresh("r");
                out += pad + "let " + r + ": ptr = &" + choose(locals)->name + ";\n";
                if (chance(0.5)) {
                    out += pad + "*" + r + " = " + int_expr(1) + ";\n";
                } else {
                    const std::string t = int_target();
                    if (!t.empty()) out += pad + t + " = *" + r + ";\n";
                }
                return;
            }
            case 20: {
                const std::string gp = "gp" + std::to_string(pick(labels_.size()));
                const size_t r = pick(3);
                if (r == 0) {
                    out += pad + gp + " = &" + choose(globals_of(GlobalKind::Int))->name + ";\n";
                } else if (r == 1) {
                    out += pad + "*" + gp + " = " + int_expr(1) + ";\n";
                } else {
                    const std::string t = int_target();
                    if (t.empty()) continue;
                    out += pad + t + " = *" + gp + ";\n";
                }
                return;
            }
            case 21: {
                const size_t r = pick(10);
                if (r < 6) {
                    const std::string s = fresh("s");
                    out += pad + "[[partition(" + label() + ", rw)]] let " + s + ": int = " + int_expr(1) + ";\n";
                    declare(s, LocalKind::Int);
                } else if (r < 9 && is_main) {
                    const std::string t = fresh("l");
                    const size_t k = pick(8);
                    out += pad + "let " + t + ": int = 0;\n";
                    declare(t, LocalKind::Int);
                    out += pad + "if (len > " + std::to_string(k) + ") {\n";
                    out += pad + "    " + t + " = input[" + std::to_string(k) + "];\n";
                    out += pad + "}\n";
                } else if (r == 9) {
                    out += pad + "free(&" + choose(globals_of(GlobalKind::Int))->name + ");\n";
                } else {
                    continue;
                }
                return;
            }
            default: continue;
            }
        }
    }

    void heap_local(std::string& out, const std::string& pad) {
        const std::string p = fresh("p");
        static const uint32_t kSizes[] = {8, 16, 32};
        const uint32_t size = chance(0.05) ? 0 : kSizes[pick(3)];
        std::string attr;
        if (chance(0.3)) attr = "[[partition(" + label() + ", rw)]] ";
        out += pad + attr + "let " + p + ": ptr = alloc(" + std::to_string(size) + ");\n";
        if (size > 0) {
            const size_t uses = pick(3);
            for (size_t i = 0; i < uses; ++i) {
                const size_t r = pick(3);
                if (r == 0) {
                    out += pad + p + "[" + std::to_string(pick(size)) + "] = " + int_expr(1) + ";\n";
                } else if (r == 1) {
                    out += pad + "*" + p + " = " + int_expr(1) + ";\n";
                } else {
                    const std::string t = int_target();
                    if (!t.empty()) out += pad + t + " = " + p + "[" + std::to_string(pick(size)) + "];\n";
                }
            }
        }
        if (chance(0.75)) {
            out += pad + "free(" + p + ");\n";
            if (chance(0.1)) out += pad + "free(" + p + ");\n";
        }
    }

    std::mt19937_64 rng_;
    GeneratorOptions opt_;
    GeneratedProgram result_;
    std::vector<uint32_t> labels_;
    std::vector<std::vector<GlobalInfo>> globals_;
    std::vector<FnInfo> functions_;
    size_t current_ = 0;
    std::vector<std::vector<Local>> scopes_;
    std::vector<std::string> params_;
    uint32_t next_name_ = 0;
};

} // namespace

GeneratedProgram generate_program(uint64_t seed, const GeneratorOptions& options) {
    return Generator(seed, options).run();
}

} // namespace partc::testgen
