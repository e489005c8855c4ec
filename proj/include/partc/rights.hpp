#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace partc {

/// A subset of {read, write}. Exactly four values exist.
class AccessRights {
  public:
    constexpr AccessRights() = default;

    static constexpr AccessRights none() { return AccessRights(0); }
    static constexpr AccessRights read() { return AccessRights(kRead); }
    static constexpr AccessRights write() { return AccessRights(kWrite); }
    static constexpr AccessRights read_write() { return AccessRights(kRead | kWrite); }

    /// All four values, bottom first.
    static constexpr std::array<AccessRights, 4> all() {
        return {none(), read(), write(), read_write()};
    }

    [[nodiscard]] constexpr bool can_read() const { return (bits_ & kRead) != 0; }
    [[nodiscard]] constexpr bool can_write() const { return (bits_ & kWrite) != 0; }
    [[nodiscard]] constexpr bool empty() const { return bits_ == 0; }
    [[nodiscard]] constexpr uint8_t bits() const { return bits_; }

    [[nodiscard]] constexpr AccessRights join(AccessRights other) const {
        return AccessRights(bits_ | other.bits_);
    }
    [[nodiscard]] constexpr AccessRights meet(AccessRights other) const {
        return AccessRights(bits_ & other.bits_);
    }
    [[nodiscard]] constexpr AccessRights without_write() const {
        return AccessRights(bits_ & kRead);
    }
    /// Set inclusion: every right in *this is also in other.
    [[nodiscard]] constexpr bool subset_of(AccessRights other) const {
        return (bits_ & ~other.bits_) == 0;
    }

    /// "rw", "r", "w" or "none".
    [[nodiscard]] std::string_view to_string() const;
    static std::optional<AccessRights> parse(std::string_view text);

    friend constexpr bool operator==(AccessRights, AccessRights) = default;

  private:
    static constexpr uint8_t kRead = 1;
    static constexpr uint8_t kWrite = 2;
    constexpr explicit AccessRights(uint8_t bits) : bits_(bits) {}

    uint8_t bits_ = 0;
};

enum class RightsOrdering { Less, Equal, Greater, Incomparable };

std::string_view to_string(RightsOrdering ordering);

RightsOrdering rights_partial_order(AccessRights a, AccessRights b);

/// a >= b under the lattice order.
inline bool rights_at_least(AccessRights a, AccessRights b) { return b.subset_of(a); }

/// The per-key PKRU encoding: access-disable and write-disable.
struct PkruBits {
    bool access_disable = true;
    bool write_disable = true;

    friend constexpr bool operator==(PkruBits, PkruBits) = default;
};

/// Throws Error(UnrepresentableRights) for write-only rights.
PkruBits rights_to_pkru_bits(AccessRights rights);

/// Inverse of rights_to_pkru_bits. AD=1 always decodes to no access.
AccessRights pkru_bits_to_rights(PkruBits bits);

} // namespace partc
