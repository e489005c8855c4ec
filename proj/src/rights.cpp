#include "partc/rights.hpp"

#include "partc/error.hpp"

namespace partc {

std::string_view AccessRights::to_string() const {
    switch (bits_) {
    case kRead | kWrite: return "rw";
    case kRead: return "r";
    case kWrite: return "w";
    default: return "none";
    }
}

std::optional<AccessRights> AccessRights::parse(std::string_view text) {
    if (text == "rw" || text == "wr") return read_write();
    if (text == "r") return read();
    if (text == "w") return write();
    if (text == "none") return none();
    return std::nullopt;
}

std::string_view to_string(RightsOrdering ordering) {
    switch (ordering) {
    case RightsOrdering::Less: return "Less";
    case RightsOrdering::Equal: return "Equal";
    case RightsOrdering::Greater: return "Greater";
    case RightsOrdering::Incomparable: return "Incomparable";
    }
    return "Incomparable";
}

RightsOrdering rights_partial_order(AccessRights a, AccessRights b) {
    const bool a_in_b = a.subset_of(b);
    const bool b_in_a = b.subset_of(a);
    if (a_in_b && b_in_a) return RightsOrdering::Equal;
    if (a_in_b) return RightsOrdering::Less;
    if (b_in_a) return RightsOrdering::Greater;
    return RightsOrdering::Incomparable;
}

PkruBits rights_to_pkru_bits(AccessRights rights) {
    if (rights == AccessRights::write()) {
        throw Error(ErrorCode::UnrepresentableRights,
                    "write-only rights cannot be encoded with access-disable/write-disable bits");
    }
    if (rights == AccessRights::read_write()) return {false, false};
    if (rights == AccessRights::read()) return {false, true};
    return {true, true};
}

AccessRights pkru_bits_to_rights(PkruBits bits) {
    if (bits.access_disable) return AccessRights::none();
    return bits.write_disable ? AccessRights::read() : AccessRights::read_write();
}

} // namespace partc
