#include <doctest.h>

#include <algorithm>
#include <set>

#include "partc/error.hpp"
#include "partc/rights.hpp"

using namespace partc;

namespace {

// Reference model: rights as a plain set of letters.
std::set<char> as_set(AccessRights r) {
    std::set<char> s;
    if (r.can_read()) s.insert('r');
    if (r.can_write()) s.insert('w');
    return s;
}

RightsOrdering by_inclusion(AccessRights a, AccessRights b) {
    const auto sa = as_set(a);
    const auto sb = as_set(b);
    const bool a_in_b = std::includes(sb.begin(), sb.end(), sa.begin(), sa.end());
    const bool b_in_a = std::includes(sa.begin(), sa.end(), sb.begin(), sb.end());
    if (a_in_b && b_in_a) return RightsOrdering::Equal;
    if (a_in_b) return RightsOrdering::Less;
    if (b_in_a) return RightsOrdering::Greater;
    return RightsOrdering::Incomparable;
}

} // namespace

TEST_CASE("all sixteen ordered pairs match set inclusion") {
    int checked = 0;
    for (AccessRights a : AccessRights::all()) {
        for (AccessRights b : AccessRights::all()) {
            CAPTURE(a.to_string());
            CAPTURE(b.to_string());
            CHECK(rights_partial_order(a, b) == by_inclusion(a, b));
            ++checked;
        }
    }
    CHECK(checked == 16);
}

TEST_CASE("named orderings") {
    CHECK(rights_partial_order(AccessRights::read(), AccessRights::write()) == RightsOrdering::Incomparable);
    CHECK(rights_partial_order(AccessRights::write(), AccessRights::read()) == RightsOrdering::Incomparable);
    CHECK(rights_partial_order(AccessRights::none(), AccessRights::read_write()) == RightsOrdering::Less);
    CHECK(rights_partial_order(AccessRights::read_write(), AccessRights::read()) == RightsOrdering::Greater);
    CHECK(rights_partial_order(AccessRights::read(), AccessRights::read()) == RightsOrdering::Equal);
}

TEST_CASE("bottom and top are unique") {
    int bottoms = 0;
    int tops = 0;
    for (AccessRights x : AccessRights::all()) {
        bool below_all = true;
        bool above_all = true;
        for (AccessRights y : AccessRights::all()) {
            const auto o = rights_partial_order(x, y);
            below_all = below_all && (o == RightsOrdering::Less || o == RightsOrdering::Equal);
            above_all = above_all && (o == RightsOrdering::Greater || o == RightsOrdering::Equal);
        }
        if (below_all) {
            ++bottoms;
            CHECK(x == AccessRights::none());
        }
        if (above_all) {
            ++tops;
            CHECK(x == AccessRights::read_write());
        }
    }
    CHECK(bottoms == 1);
    CHECK(tops == 1);
}

TEST_CASE("join and meet are union and intersection") {
    for (AccessRights a : AccessRights::all()) {
        for (AccessRights b : AccessRights::all()) {
            const std::set<char> sa = as_set(a);
            const std::set<char> sb = as_set(b);
            std::set<char> u = sa;
            u.insert(sb.begin(), sb.end());
            std::set<char> i;
            for (char c : sa) {
                if (sb.count(c)) i.insert(c);
            }
            CHECK(as_set(a.join(b)) == u);
            CHECK(as_set(a.meet(b)) == i);
            CHECK(rights_at_least(a.join(b), a));
            CHECK(rights_at_least(a, a.meet(b)));
        }
    }
}

TEST_CASE("text form round-trips") {
    for (AccessRights a : AccessRights::all()) {
        auto parsed = AccessRights::parse(a.to_string());
        REQUIRE(parsed);
        CHECK(*parsed == a);
    }
    CHECK_FALSE(AccessRights::parse("x"));
    CHECK_FALSE(AccessRights::parse(""));
    CHECK(AccessRights::parse("wr") == AccessRights::read_write());
}

TEST_CASE("pkru encoding") {
    CHECK(rights_to_pkru_bits(AccessRights::none()) == PkruBits{true, true});
    CHECK(rights_to_pkru_bits(AccessRights::read()) == PkruBits{false, true});
    CHECK(rights_to_pkru_bits(AccessRights::read_write()) == PkruBits{false, false});

    SUBCASE("write-only is unrepresentable") {
        try {
            (void)rights_to_pkru_bits(AccessRights::write());
            FAIL("expected an error");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::UnrepresentableRights);
        }
    }

    SUBCASE("round trip for every representable value") {
        for (AccessRights a : AccessRights::all()) {
            if (a == AccessRights::write()) continue;
            CHECK(pkru_bits_to_rights(rights_to_pkru_bits(a)) == a);
        }
    }

    SUBCASE("access-disable dominates") {
        CHECK(pkru_bits_to_rights({true, false}) == AccessRights::none());
        CHECK(pkru_bits_to_rights({true, true}) == AccessRights::none());
    }
}
