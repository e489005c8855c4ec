#include "partc/machine.hpp"

#include <algorithm>
#include <cstdio>
#include <unordered_map>

namespace partc {

namespace {

std::string hex(uint64_t value) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "0x%llx", static_cast<unsigned long long>(value));
    return buf;
}

uint64_t round_up(uint64_t value, uint64_t align) { return (value + align - 1) / align * align; }

constexpr uint64_t kBlockAlign = 16;

} // namespace

std::string_view to_string(FaultKind kind) {
    switch (kind) {
    case FaultKind::PkeyAccessFault: return "PkeyAccessFault";
    case FaultKind::PkeyWriteFault: return "PkeyWriteFault";
    case FaultKind::CfiFault: return "CfiFault";
    case FaultKind::DoubleFree: return "DoubleFree";
    case FaultKind::InvalidFree: return "InvalidFree";
    case FaultKind::UnknownKey: return "UnknownKey";
    case FaultKind::OutOfMemory: return "OutOfMemory";
    case FaultKind::InvalidSize: return "InvalidSize";
    case FaultKind::ConflictingRegistration: return "ConflictingRegistration";
    case FaultKind::UnrepresentableRights: return "UnrepresentableRights";
    case FaultKind::StepLimit: return "StepLimit";
    }
    return "?";
}

std::string Fault::describe() const {
    std::string out = std::string(to_string(kind)) + " stmt=" + std::to_string(stmt.value) + " addr=" + hex(address);
    if (!target.empty()) out += " target=" + target;
    if (!detail.empty()) out += " detail=" + detail;
    return out;
}

MachineFault::MachineFault(Fault fault) : fault_(std::move(fault)), text_(fault_.describe()) {}

std::string pkru_to_string(const PkruImage& pkru, size_t key_count) {
    std::string out;
    for (size_t k = 0; k < key_count && k < pkru.size(); ++k) {
        if (k) out += ',';
        out += std::to_string(k) + ":" + std::string(pkru_bits_to_rights(pkru[k]).to_string());
    }
    return out;
}

// ---- PartitionHeap ----

PartitionHeap::PartitionHeap(uint64_t base, uint64_t length) : base_(base), length_(length) {
    free_spans_[base] = length;
}

std::optional<uint64_t> PartitionHeap::allocate(uint64_t size, bool stack) {
    if (size > length_) return std::nullopt;
    const uint64_t span = round_up(std::max<uint64_t>(size, 1), kBlockAlign);
    for (auto it = free_spans_.begin(); it != free_spans_.end(); ++it) {
        if (it->second < span) continue;
        const uint64_t address = it->first;
        const uint64_t remaining = it->second - span;
        free_spans_.erase(it);
        if (remaining > 0) free_spans_[address + span] = remaining;
        live_[address] = Block{size, span, stack};
        return address;
    }
    return std::nullopt;
}

PartitionHeap::Block PartitionHeap::release(uint64_t address) {
    auto it = live_.find(address);
    Block block = it->second;
    live_.erase(it);
    uint64_t start = address;
    uint64_t length = block.span;
    auto next = free_spans_.lower_bound(address);
    if (next != free_spans_.end() && next->first == start + length) {
        length += next->second;
        next = free_spans_.erase(next);
    }
    if (next != free_spans_.begin()) {
        auto prev = std::prev(next);
        if (prev->first + prev->second == start) {
            start = prev->first;
            length += prev->second;
            free_spans_.erase(prev);
        }
    }
    free_spans_[start] = length;
    return block;
}

const PartitionHeap::Block* PartitionHeap::live_block(uint64_t address) const {
    auto it = live_.find(address);
    return it == live_.end() ? nullptr : &it->second;
}

// ---- AttackReport ----

std::string AttackReport::to_json() const {
    return "{\"bytes_leaked\": " + std::to_string(bytes_leaked) + ", \"bytes_corrupted\": " +
           std::to_string(bytes_corrupted) + ", \"faults\": " + std::to_string(faults) + ", \"range\": \"" +
           hex(range_begin) + ".." + hex(range_end) + "\"}";
}

// ---- Machine setup ----

Machine Machine::init(const LayoutPlan& layout, const Policy& policy, const KeyAssignment& keys,
                      std::string_view entry, MachineOptions options) {
    if (policy.partitions.size() > kMaxPartitions) {
        throw Error(ErrorCode::KeyExhaustion, std::to_string(policy.partitions.size()) +
                                                  " partitions declared, at most " +
                                                  std::to_string(kMaxPartitions) + " keys are available");
    }
    check_layout(layout);
    Machine m;
    m.layout_ = layout;
    m.policy_ = policy;
    m.keys_ = keys;
    m.options_ = options;
    for (const auto& p : policy.partitions) {
        if (!keys.key_of(p.label)) {
            throw Error(ErrorCode::UnknownPartition, "partition " + std::to_string(p.label) + " has no key");
        }
    }
    ProtectionKey max_key = 0;
    for (const auto& [label, key] : keys.entries()) max_key = std::max(max_key, key);
    m.key_count_ = max_key + 1;

    for (const auto& r : layout.regions) {
        if (r.partition) {
            auto key = keys.key_of(*r.partition);
            if (!key || *key != r.key) {
                throw Error(ErrorCode::UnknownPartition,
                            "layout region at " + hex(r.base) + " disagrees with the key assignment");
            }
        } else if (r.key != kRuntimeKey) {
            throw Error(ErrorCode::UnknownPartition, "runtime region must use key 0");
        }
        for (uint64_t a = r.base; a < r.end(); a += layout.page_size) {
            m.pages_[a / layout.page_size] = Page{r.key, r.writable()};
        }
        m.memory_[r.base] = std::vector<uint8_t>(r.length, 0);
        if (r.kind == RegionKind::Heap) m.heaps_[r.key] = PartitionHeap(r.base, r.length);
    }

    m.threads_.resize(1);
    PkruImage& pkru = m.threads_[0].pkru;
    pkru.fill(PkruBits{true, true});
    pkru[kRuntimeKey] = PkruBits{false, false};
    if (auto stmt = policy.function_entry(entry)) pkru = m.image_of(policy.vector_at(*stmt));
    return m;
}

void Machine::load(const ir::Module& module) {
    for (const auto& g : module.globals) {
        const SymbolPlacement* s = layout_.symbol(g.id.name);
        if (s == nullptr) throw Error(ErrorCode::FormatError, "layout has no placement for global '" + g.id.name + "'");
        for (size_t i = 0; i < g.init.size() && i < s->size; ++i) *byte_ptr(s->address + i) = g.init[i];
    }
    code_.clear();
    code_addresses_.clear();
    function_homes_.clear();
    for (size_t i = 0; i < module.functions.size(); ++i) {
        const uint64_t address = kCodeBase + kCodeStride * i;
        code_[address] = module.functions[i].name;
        code_addresses_[module.functions[i].name] = address;
        function_homes_[module.functions[i].name] = module.functions[i].home;
    }
}

// ---- memory ----

const Machine::Page* Machine::page(uint64_t address) const {
    auto it = pages_.find(address / layout_.page_size);
    return it == pages_.end() ? nullptr : &it->second;
}

uint8_t* Machine::byte_ptr(uint64_t address) {
    return const_cast<uint8_t*>(static_cast<const Machine*>(this)->byte_ptr(address));
}

const uint8_t* Machine::byte_ptr(uint64_t address) const {
    auto it = memory_.upper_bound(address);
    if (it == memory_.begin()) return nullptr;
    --it;
    if (address - it->first >= it->second.size()) return nullptr;
    return &it->second[address - it->first];
}

std::optional<ProtectionKey> Machine::page_key(uint64_t address) const {
    const Page* p = page(address);
    if (p == nullptr) return std::nullopt;
    return p->key;
}

std::optional<uint8_t> Machine::peek(uint64_t address) const {
    const uint8_t* b = byte_ptr(address);
    if (b == nullptr) return std::nullopt;
    return *b;
}

void Machine::poke(uint64_t address, uint8_t value) {
    uint8_t* b = byte_ptr(address);
    if (b == nullptr) fault(FaultKind::PkeyAccessFault, address, {}, "unmapped");
    *b = value;
}

void Machine::scrub(uint64_t address, uint64_t length) {
    for (uint64_t i = 0; i < length; ++i) *byte_ptr(address + i) = kScrubByte;
}

uint64_t Machine::load(uint64_t address, uint32_t width, StatementId stmt) {
    uint64_t value = 0;
    ProtectionKey key = kRuntimeKey;
    for (uint32_t i = 0; i < width; ++i) {
        const uint64_t a = address + i;
        const Page* p = page(a);
        if (p == nullptr) fault(FaultKind::PkeyAccessFault, a, stmt, "unmapped");
        if (pkru()[p->key].access_disable) fault(FaultKind::PkeyAccessFault, a, stmt, "key=" + std::to_string(p->key));
        key = p->key;
        value |= static_cast<uint64_t>(*byte_ptr(a)) << (8 * i);
    }
    if (TraceEvent* e = record(EventKind::Load)) {
        e->fields = {{"stmt", std::to_string(stmt.value)},
                     {"addr", hex(address)},
                     {"width", std::to_string(width)},
                     {"key", std::to_string(key)},
                     {"value", hex(value)}};
    }
    return value;
}

void Machine::store(uint64_t address, uint64_t value, uint32_t width, StatementId stmt) {
    ProtectionKey key = kRuntimeKey;
    for (uint32_t i = 0; i < width; ++i) {
        const uint64_t a = address + i;
        const Page* p = page(a);
        if (p == nullptr) fault(FaultKind::PkeyAccessFault, a, stmt, "unmapped");
        const PkruBits bits = pkru()[p->key];
        if (bits.access_disable || bits.write_disable) {
            fault(FaultKind::PkeyWriteFault, a, stmt, "key=" + std::to_string(p->key));
        }
        if (!p->writable) fault(FaultKind::PkeyWriteFault, a, stmt, "read-only");
        key = p->key;
    }
    for (uint32_t i = 0; i < width; ++i) *byte_ptr(address + i) = static_cast<uint8_t>(value >> (8 * i));
    if (TraceEvent* e = record(EventKind::Store)) {
        e->fields = {{"stmt", std::to_string(stmt.value)},
                     {"addr", hex(address)},
                     {"width", std::to_string(width)},
                     {"key", std::to_string(key)},
                     {"value", hex(value)}};
    }
}

// ---- runtime interface ----

TraceEvent* Machine::record(EventKind kind) {
    if (!options_.record_trace) return nullptr;
    return &trace_.append(kind);
}

void Machine::fault(FaultKind kind, uint64_t address, StatementId stmt, std::string detail, std::string target) {
    throw MachineFault(Fault{kind, address, std::move(target), stmt, std::move(detail)});
}

std::string Machine::label_name(PartitionLabel label) const { return std::to_string(label); }

std::string Machine::pkru_string() const { return pkru_to_string(pkru(), key_count_); }

PkruImage Machine::image_of(const PrivilegeVector& vector) const {
    PkruImage image;
    image.fill(PkruBits{true, true});
    image[kRuntimeKey] = PkruBits{false, false};
    for (const auto& [label, rights] : vector.entries()) {
        auto key = keys_.key_of(label);
        if (!key) continue;
        image[*key] = rights_to_pkru_bits(rights);
    }
    return image;
}

void Machine::write_pkru(const PkruImage& image, StatementId stmt, std::string_view reason, PartitionLabel from,
                         PartitionLabel to) {
    const std::string before = pkru_string();
    threads_[current_thread_].pkru = image;
    ++wrpkru_count_;
    if (TraceEvent* e = record(EventKind::Switch)) {
        e->fields = {{"stmt", std::to_string(stmt.value)},
                     {"reason", std::string(reason)},
                     {"from", label_name(from)},
                     {"to", label_name(to)},
                     {"before", before},
                     {"after", pkru_string()}};
    }
}

void Machine::set_privileges(const PrivilegeVector& vector, StatementId stmt, std::string_view reason,
                             PartitionLabel from, PartitionLabel to) {
    PkruImage image;
    try {
        image = image_of(vector);
    } catch (const Error& e) {
        fault(FaultKind::UnrepresentableRights, 0, stmt, vector.to_string());
    }
    write_pkru(image, stmt, reason, from, to);
}

uint64_t Machine::partition_alloc(uint64_t size, ProtectionKey key, StatementId stmt) {
    auto it = heaps_.find(key);
    if (it == heaps_.end()) fault(FaultKind::UnknownKey, 0, stmt, "key=" + std::to_string(key));
    if (size == 0) fault(FaultKind::InvalidSize, 0, stmt, "size=0");
    auto address = it->second.allocate(size, false);
    if (!address) fault(FaultKind::OutOfMemory, 0, stmt, "size=" + std::to_string(size));
    const PartitionHeap::Block* block = it->second.live_block(*address);
    freed_.erase(freed_.lower_bound(*address), freed_.lower_bound(*address + block->span));
    if (TraceEvent* e = record(EventKind::Alloc)) {
        e->fields = {{"stmt", std::to_string(stmt.value)},
                     {"key", std::to_string(key)},
                     {"size", std::to_string(size)},
                     {"addr", hex(*address)}};
    }
    return *address;
}

void Machine::partition_free(uint64_t address, ProtectionKey key, StatementId stmt) {
    auto it = heaps_.find(key);
    if (it == heaps_.end()) fault(FaultKind::UnknownKey, address, stmt, "key=" + std::to_string(key));
    const PartitionHeap* owner = nullptr;
    ProtectionKey owner_key = kRuntimeKey;
    for (const auto& [k, h] : heaps_) {
        if (h.contains(address)) {
            owner = &h;
            owner_key = k;
        }
    }
    const PartitionHeap::Block* block = owner != nullptr ? owner->live_block(address) : nullptr;
    if (block == nullptr) {
        if (freed_.count(address)) fault(FaultKind::DoubleFree, address, stmt, "");
        fault(FaultKind::InvalidFree, address, stmt, owner == nullptr ? "not a heap address" : "not a block start");
    }
    if (block->stack) fault(FaultKind::InvalidFree, address, stmt, "stack slot");
    if (owner_key != key) {
        fault(FaultKind::InvalidFree, address, stmt, "block belongs to key " + std::to_string(owner_key));
    }
    const PartitionHeap::Block released = heaps_[key].release(address);
    scrub(address, released.span);
    freed_.insert(address);
    if (TraceEvent* e = record(EventKind::Free)) {
        e->fields = {{"stmt", std::to_string(stmt.value)},
                     {"key", std::to_string(key)},
                     {"size", std::to_string(released.size)},
                     {"addr", hex(address)}};
    }
}

void Machine::register_at_fn(const std::string& function, const PrivilegeVector& vector, StatementId stmt) {
    auto it = at_table_.find(function);
    if (it != at_table_.end()) {
        if (it->second != vector) {
            fault(FaultKind::ConflictingRegistration, 0, stmt, "", function);
        }
        return;
    }
    at_table_[function] = vector;
    if (TraceEvent* e = record(EventKind::Register)) {
        e->fields = {{"stmt", std::to_string(stmt.value)}, {"fn", function}, {"vector", vector.to_string()}};
    }
}

std::optional<uint64_t> Machine::function_address(std::string_view name) const {
    auto it = code_addresses_.find(std::string(name));
    if (it == code_addresses_.end()) return std::nullopt;
    return it->second;
}

bool Machine::set_privileges_dynamic(uint64_t target, StatementId stmt, PartitionLabel from) {
    auto code = code_.find(target);
    if (code == code_.end()) fault(FaultKind::CfiFault, target, stmt, "not a function");
    auto entry = at_table_.find(code->second);
    if (entry == at_table_.end()) fault(FaultKind::CfiFault, target, stmt, "unregistered", code->second);
    const PkruImage image = image_of(entry->second);
    if (image == pkru()) return false;
    write_pkru(image, stmt, "dynamic_enter", from, function_homes_[code->second]);
    return true;
}

bool Machine::restore_privileges_dynamic(const PrivilegeVector& vector, StatementId stmt, PartitionLabel to) {
    const PkruImage image = image_of(vector);
    if (image == pkru()) return false;
    write_pkru(image, stmt, "dynamic_exit", to, to);
    return true;
}

const PartitionHeap* Machine::heap(ProtectionKey key) const {
    auto it = heaps_.find(key);
    return it == heaps_.end() ? nullptr : &it->second;
}

// ---- attack ----

AttackReport Machine::attack(PartitionLabel acting, AttackOp op, uint64_t begin, uint64_t end) {
    if (!policy_.declares(acting)) {
        throw Error(ErrorCode::UnknownPartition, "partition " + std::to_string(acting) + " is not declared");
    }
    AttackReport report;
    report.range_begin = begin;
    report.range_end = end;
    const PkruImage saved = pkru();
    threads_[current_thread_].pkru = image_of(policy_.default_vector(acting));
    for (uint64_t a = begin; a < end; ++a) {
        const Page* p = page(a);
        const PkruBits bits = p != nullptr ? pkru()[p->key] : PkruBits{true, true};
        if (op == AttackOp::Read) {
            if (p == nullptr || bits.access_disable) {
                ++report.faults;
            } else {
                ++report.bytes_leaked;
            }
        } else {
            if (p == nullptr || bits.access_disable || bits.write_disable || !p->writable) {
                ++report.faults;
            } else {
                *byte_ptr(a) = static_cast<uint8_t>(~*byte_ptr(a));
                ++report.bytes_corrupted;
            }
        }
    }
    threads_[current_thread_].pkru = saved;
    return report;
}

// ---- interpreter ----

namespace {

struct FunctionInfo {
    const ir::Function* fn = nullptr;
    std::unordered_map<ir::BlockId, const ir::BasicBlock*> blocks;
};

struct Frame {
    const FunctionInfo* info = nullptr;
    std::vector<uint64_t> values;
    const ir::BasicBlock* block = nullptr;
    ir::BlockId prev = 0;
    size_t ip = 0;
    std::vector<std::pair<ProtectionKey, uint64_t>> stack_blocks;
    ir::ValueId result = 0;
};

} // namespace

RunResult Machine::run(const ir::Module& module, std::string_view entry, std::span<const uint8_t> input) {
    RunResult result;
    std::unordered_map<std::string, FunctionInfo> infos;
    for (const auto& fn : module.functions) {
        FunctionInfo& info = infos[fn.name];
        info.fn = &fn;
        for (const auto& b : fn.blocks) info.blocks[b.id] = &b;
    }
    if (code_.empty()) load(module);
    auto entry_it = infos.find(std::string(entry));
    if (entry_it == infos.end()) {
        throw Error(ErrorCode::SemanticError, "entry function '" + std::string(entry) + "' does not exist");
    }

    std::vector<Frame> frames;
    auto push_frame = [&](const FunctionInfo& info, const std::vector<uint64_t>& args, ir::ValueId result_slot) {
        Frame f;
        f.info = &info;
        f.values.assign(info.fn->next_value, 0);
        for (size_t i = 0; i < info.fn->params.size(); ++i) f.values[info.fn->params[i]] = i < args.size() ? args[i] : 0;
        f.block = info.fn->blocks.empty() ? nullptr : &info.fn->blocks.front();
        f.result = result_slot;
        frames.push_back(std::move(f));
    };
    auto release_stack = [&](Frame& f) {
        for (auto it = f.stack_blocks.rbegin(); it != f.stack_blocks.rend(); ++it) {
            const PartitionHeap::Block b = heaps_[it->first].release(it->second);
            scrub(it->second, b.span);
        }
        f.stack_blocks.clear();
    };

    try {
        std::vector<uint64_t> args;
        const PartitionLabel entry_home = entry_it->second.fn->home;
        if (!input.empty()) {
            auto key = keys_.key_of(entry_home);
            auto address = key ? heaps_[*key].allocate(input.size(), false) : std::nullopt;
            if (!address) fault(FaultKind::OutOfMemory, 0, {}, "input of " + std::to_string(input.size()) + " bytes");
            for (size_t i = 0; i < input.size(); ++i) *byte_ptr(*address + i) = input[i];
            args = {*address, input.size()};
        } else {
            args = {0, 0};
        }
        push_frame(entry_it->second, args, 0);

        while (!frames.empty()) {
            Frame& f = frames.back();
            if (f.block == nullptr || f.ip >= f.block->instructions.size()) {
                throw Error(ErrorCode::SemanticError, "control fell off a block in @" + f.info->fn->name);
            }
            const ir::Instruction& in = f.block->instructions[f.ip++];
            if (++result.steps > options_.step_limit) fault(FaultKind::StepLimit, 0, in.stmt, "");
            auto v = [&f](size_t i) -> uint64_t { return f.values[i]; };
            using ir::Opcode;
            switch (in.op) {
            case Opcode::AllocStack: {
                const PartitionLabel label = in.md ? in.md->partition_label : f.info->fn->home;
                auto key = keys_.key_of(label);
                if (!key) fault(FaultKind::UnknownKey, 0, in.stmt, "partition " + std::to_string(label));
                auto address = heaps_[*key].allocate(std::max<uint32_t>(in.width, 1), true);
                if (!address) fault(FaultKind::OutOfMemory, 0, in.stmt, "stack slot");
                freed_.erase(freed_.lower_bound(*address), freed_.lower_bound(*address + in.width + kBlockAlign));
                f.stack_blocks.emplace_back(*key, *address);
                f.values[in.id] = *address;
                break;
            }
            case Opcode::HeapAlloc:
            case Opcode::HeapFree:
                throw Error(ErrorCode::SemanticError, "module is not instrumented: raw heap operation in @" +
                                                          f.info->fn->name);
            case Opcode::PartitionAlloc:
                f.values[in.id] = partition_alloc(v(in.operands[0]), in.key, in.stmt);
                break;
            case Opcode::PartitionFree:
                partition_free(v(in.operands[0]), in.key, in.stmt);
                break;
            case Opcode::Load:
                f.values[in.id] = load(v(in.operands[0]), in.width, in.stmt);
                break;
            case Opcode::Store:
                store(v(in.operands[0]), v(in.operands[1]), in.width, in.stmt);
                break;
            case Opcode::CallDirect:
            case Opcode::CallIndirect: {
                std::string callee;
                size_t first_arg = 0;
                if (in.op == Opcode::CallDirect) {
                    callee = in.symbol;
                } else {
                    auto code = code_.find(v(in.operands[0]));
                    if (code == code_.end()) fault(FaultKind::CfiFault, v(in.operands[0]), in.stmt, "not a function");
                    callee = code->second;
                    first_arg = 1;
                }
                auto target = infos.find(callee);
                if (target == infos.end()) fault(FaultKind::CfiFault, 0, in.stmt, "no such function", callee);
                std::vector<uint64_t> call_args;
                for (size_t i = first_arg; i < in.operands.size(); ++i) call_args.push_back(v(in.operands[i]));
                if (TraceEvent* e = record(EventKind::Call)) {
                    e->fields = {{"stmt", std::to_string(in.stmt.value)},
                                 {"fn", callee},
                                 {"via", in.op == Opcode::CallDirect ? "direct" : "indirect"}};
                }
                push_frame(target->second, call_args, in.id);
                break;
            }
            case Opcode::TakeFnAddr: {
                auto address = function_address(in.symbol);
                if (!address) fault(FaultKind::CfiFault, 0, in.stmt, "no such function", in.symbol);
                f.values[in.id] = *address;
                break;
            }
            case Opcode::GlobalAddr: {
                const SymbolPlacement* s = layout_.symbol(in.symbol);
                if (s == nullptr) throw Error(ErrorCode::FormatError, "layout has no symbol '" + in.symbol + "'");
                f.values[in.id] = s->address;
                break;
            }
            case Opcode::Phi: {
                bool found = false;
                for (size_t i = 0; i < in.operands.size(); ++i) {
                    if (in.targets[i] == f.prev) {
                        f.values[in.id] = v(in.operands[i]);
                        found = true;
                        break;
                    }
                }
                if (!found) throw Error(ErrorCode::SemanticError, "phi has no incoming value for the taken edge");
                break;
            }
            case Opcode::Branch: {
                ir::BlockId next = in.targets[0];
                if (!in.operands.empty() && v(in.operands[0]) == 0) next = in.targets[1];
                f.prev = f.block->id;
                f.block = f.info->blocks.at(next);
                f.ip = 0;
                break;
            }
            case Opcode::Ret: {
                const uint64_t value = in.operands.empty() ? 0 : v(in.operands[0]);
                release_stack(f);
                const std::string name = f.info->fn->name;
                const ir::ValueId slot = f.result;
                frames.pop_back();
                if (frames.empty()) {
                    result.return_value = value;
                } else {
                    if (TraceEvent* e = record(EventKind::Return)) {
                        e->fields = {{"stmt", std::to_string(in.stmt.value)}, {"fn", name}, {"value", hex(value)}};
                    }
                    frames.back().values[slot] = value;
                }
                break;
            }
            case Opcode::Const:
                f.values[in.id] = static_cast<uint64_t>(in.imm);
                break;
            case Opcode::Arith:
                f.values[in.id] = ir::eval_arith(in.arith, v(in.operands[0]),
                                                 in.operands.size() > 1 ? v(in.operands[1]) : 0);
                break;
            case Opcode::Halt:
                result.halted = true;
                while (!frames.empty()) {
                    release_stack(frames.back());
                    frames.pop_back();
                }
                break;
            case Opcode::ScopeEnter:
            case Opcode::ScopeExit:
                break;
            case Opcode::SetPrivileges:
                set_privileges(in.vector, in.stmt, ir::to_string(in.reason), in.from, in.to);
                break;
            case Opcode::SetPrivilegesDynamic:
                set_privileges_dynamic(v(in.operands[0]), in.stmt, f.info->fn->home);
                break;
            case Opcode::RestorePrivilegesDynamic:
                restore_privileges_dynamic(in.vector, in.stmt, f.info->fn->home);
                break;
            case Opcode::RegisterAtFn:
                register_at_fn(in.symbol, in.vector, in.stmt);
                break;
            }
        }
    } catch (const MachineFault& mf) {
        result.fault = mf.fault();
        ++fault_count_;
        if (TraceEvent* e = record(EventKind::Fault)) {
            const Fault& ft = mf.fault();
            e->fields = {{"stmt", std::to_string(ft.stmt.value)},
                         {"kind", std::string(to_string(ft.kind))},
                         {"addr", hex(ft.address)}};
            if (!ft.target.empty()) e->fields.emplace_back("target", ft.target);
            if (!ft.detail.empty()) {
                std::string detail = ft.detail;
                std::replace(detail.begin(), detail.end(), ' ', '-');
                e->fields.emplace_back("detail", detail);
            }
        }
    }
    return result;
}

} // namespace partc
