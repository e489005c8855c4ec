#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "partc/instrument.hpp"
#include "partc/ir.hpp"
#include "partc/layout.hpp"
#include "partc/policy.hpp"
#include "partc/trace.hpp"

namespace partc {

enum class FaultKind {
    PkeyAccessFault,
    PkeyWriteFault,
    CfiFault,
    DoubleFree,
    InvalidFree,
    UnknownKey,
    OutOfMemory,
    InvalidSize,
    ConflictingRegistration,
    UnrepresentableRights,
    StepLimit,
};

std::string_view to_string(FaultKind kind);

struct Fault {
    FaultKind kind = FaultKind::PkeyAccessFault;
    uint64_t address = 0;
    std::string target;
    StatementId stmt;
    std::string detail;

    [[nodiscard]] std::string describe() const;
};

/// Thrown by machine operations; run() converts it into a Fault record.
class MachineFault : public std::exception {
  public:
    explicit MachineFault(Fault fault);
    [[nodiscard]] const Fault& fault() const { return fault_; }
    [[nodiscard]] const char* what() const noexcept override { return text_.c_str(); }

  private:
    Fault fault_;
    std::string text_;
};

using PkruImage = std::array<PkruBits, kProtectionKeyCount>;

/// "0:rw,1:none,..." over key 0 and every assigned key.
std::string pkru_to_string(const PkruImage& pkru, size_t key_count);

/// First-fit allocator over one partition's heap region with 16-byte block
/// alignment. Block headers live in runtime structures, not in the heap.
class PartitionHeap {
  public:
    struct Block {
        uint64_t size = 0;
        uint64_t span = 0;
        bool stack = false;
    };

    PartitionHeap() = default;
    PartitionHeap(uint64_t base, uint64_t length);

    /// Returns the block address or nullopt when no span is large enough.
    std::optional<uint64_t> allocate(uint64_t size, bool stack);
    /// Returns the released block; the caller scrubs it.
    Block release(uint64_t address);

    [[nodiscard]] const Block* live_block(uint64_t address) const;
    [[nodiscard]] bool contains(uint64_t address) const { return address >= base_ && address < base_ + length_; }
    [[nodiscard]] uint64_t base() const { return base_; }
    [[nodiscard]] uint64_t length() const { return length_; }
    [[nodiscard]] const std::map<uint64_t, Block>& blocks() const { return live_; }

  private:
    uint64_t base_ = 0;
    uint64_t length_ = 0;
    std::map<uint64_t, uint64_t> free_spans_;
    std::map<uint64_t, Block> live_;
};

enum class AttackOp { Read, Write };

struct AttackReport {
    uint64_t bytes_leaked = 0;
    uint64_t bytes_corrupted = 0;
    uint64_t faults = 0;
    uint64_t range_begin = 0;
    uint64_t range_end = 0;

    /// {"bytes_leaked":..,"bytes_corrupted":..,"faults":..,"range":"0xA..0xB"}
    [[nodiscard]] std::string to_json() const;

    friend bool operator==(const AttackReport&, const AttackReport&) = default;
};

struct RunResult {
    bool halted = false;
    std::optional<uint64_t> return_value;
    std::optional<Fault> fault;
    uint64_t steps = 0;

    [[nodiscard]] bool ok() const { return !fault.has_value(); }
};

inline constexpr uint64_t kCodeBase = 0x40000000;
inline constexpr uint64_t kCodeStride = 16;
inline constexpr uint64_t kDefaultStepLimit = 1'000'000;
inline constexpr uint8_t kScrubByte = 0x00;

struct MachineOptions {
    uint64_t step_limit = kDefaultStepLimit;
    bool record_trace = true;
};

class Machine {
  public:
    /// Tags every region's pages with its key, sets up partition heaps and
    /// loads PKRU with the entry function's vector when the policy knows it.
    /// Throws KeyExhaustion, LayoutOverlap or UnknownPartition.
    static Machine init(const LayoutPlan& layout, const Policy& policy, const KeyAssignment& keys,
                        std::string_view entry = "main", MachineOptions options = {});

    /// Copies global initializers and builds the code address table.
    void load(const ir::Module& module);

    // Runtime interface. Each throws MachineFault on failure.
    void set_privileges(const PrivilegeVector& vector, StatementId stmt = {}, std::string_view reason = "call_enter",
                        PartitionLabel from = 0, PartitionLabel to = 0);
    uint64_t partition_alloc(uint64_t size, ProtectionKey key, StatementId stmt = {});
    void partition_free(uint64_t address, ProtectionKey key, StatementId stmt = {});
    void register_at_fn(const std::string& function, const PrivilegeVector& vector, StatementId stmt = {});
    /// Switches to the registered vector of the target when it differs from
    /// PKRU. Returns whether a switch happened.
    bool set_privileges_dynamic(uint64_t target, StatementId stmt = {}, PartitionLabel from = 0);
    bool restore_privileges_dynamic(const PrivilegeVector& vector, StatementId stmt = {}, PartitionLabel to = 0);

    /// Executes the entry function. Input bytes, when present, are placed in
    /// the entry partition's heap and passed as (pointer, length).
    RunResult run(const ir::Module& module, std::string_view entry, std::span<const uint8_t> input);
    RunResult run(const InstrumentedModule& module, std::string_view entry, std::span<const uint8_t> input) {
        return run(module.ir, entry, input);
    }

    /// Arbitrary read/write primitive under the acting partition's default
    /// privileges. PKRU is restored afterwards.
    AttackReport attack(PartitionLabel acting, AttackOp op, uint64_t begin, uint64_t end);

    // Inspection.
    [[nodiscard]] const Trace& trace() const { return trace_; }
    [[nodiscard]] uint64_t wrpkru_count() const { return wrpkru_count_; }
    [[nodiscard]] uint64_t fault_count() const { return fault_count_; }
    [[nodiscard]] const PkruImage& pkru() const { return threads_.at(current_thread_).pkru; }
    [[nodiscard]] std::string pkru_string() const;
    [[nodiscard]] PkruImage image_of(const PrivilegeVector& vector) const;
    [[nodiscard]] std::optional<ProtectionKey> page_key(uint64_t address) const;
    [[nodiscard]] std::optional<uint8_t> peek(uint64_t address) const;
    void poke(uint64_t address, uint8_t value);
    [[nodiscard]] const std::map<std::string, PrivilegeVector>& at_table() const { return at_table_; }
    [[nodiscard]] const PartitionHeap* heap(ProtectionKey key) const;
    [[nodiscard]] const LayoutPlan& layout() const { return layout_; }
    [[nodiscard]] const KeyAssignment& keys() const { return keys_; }
    [[nodiscard]] std::optional<uint64_t> function_address(std::string_view name) const;

    /// Checked accesses as performed by loads and stores.
    uint64_t load(uint64_t address, uint32_t width, StatementId stmt);
    void store(uint64_t address, uint64_t value, uint32_t width, StatementId stmt);

  private:
    struct Page {
        ProtectionKey key = kRuntimeKey;
        bool writable = true;
    };
    struct ThreadState {
        PkruImage pkru{};
    };

    Machine() = default;

    [[nodiscard]] const Page* page(uint64_t address) const;
    uint8_t* byte_ptr(uint64_t address);
    [[nodiscard]] const uint8_t* byte_ptr(uint64_t address) const;
    void write_pkru(const PkruImage& image, StatementId stmt, std::string_view reason, PartitionLabel from,
                    PartitionLabel to);
    void scrub(uint64_t address, uint64_t length);
    [[nodiscard]] std::string label_name(PartitionLabel label) const;
    TraceEvent* record(EventKind kind);
    [[noreturn]] void fault(FaultKind kind, uint64_t address, StatementId stmt, std::string detail,
                            std::string target = {});

    LayoutPlan layout_;
    Policy policy_;
    KeyAssignment keys_;
    MachineOptions options_;
    size_t key_count_ = 1;
    std::map<uint64_t, Page> pages_;
    std::map<uint64_t, std::vector<uint8_t>> memory_;
    std::vector<ThreadState> threads_;
    size_t current_thread_ = 0;
    std::map<ProtectionKey, PartitionHeap> heaps_;
    std::set<uint64_t> freed_;
    std::map<std::string, PrivilegeVector> at_table_;
    std::map<uint64_t, std::string> code_;
    std::map<std::string, uint64_t> code_addresses_;
    std::map<std::string, PartitionLabel> function_homes_;
    uint64_t wrpkru_count_ = 0;
    uint64_t fault_count_ = 0;
    Trace trace_;
};

} // namespace partc
