#include <doctest.h>

#include "helpers.hpp"
#include "partc/oracle.hpp"

using namespace partc;

namespace {

OracleResult judge(std::string_view text, std::string_view input = {}) {
    const BuildArtifact a = build_program(text, "t.pml");
    return oracle_run(a.source_ir, a.policy, std::vector<uint8_t>(input.begin(), input.end()));
}

ViolationKind only_kind(const OracleResult& r) {
    REQUIRE(r.violations.size() == 1);
    return r.violations.begin()->kind;
}

} // namespace

TEST_CASE("signing program is clean and its stripped variant is not") {
    const std::string input = "Sign";
    const std::vector<uint8_t> bytes(input.begin(), input.end());
    const auto ok = test::build_data("signing.pml");
    const OracleResult clean = oracle_run(ok.source_ir, ok.policy, bytes);
    CHECK(clean.violations.empty());
    CHECK(clean.return_value == 20957u);

    const auto bad = test::build_data("signing_stripped.pml");
    const OracleResult r = oracle_run(bad.source_ir, bad.policy, bytes);
    REQUIRE(r.violations.size() == 1);
    CHECK(r.violations.begin()->kind == ViolationKind::Read);
    CHECK(r.violations.begin()->stmt == StatementId{20});
    CHECK(oracle_check(bad.source_ir, bad.policy, bytes) == r.violations);
}

TEST_CASE("violation kinds") {
    constexpr const char* head = "#unit a\n#pragma partition 0 rw\n#pragma partition_name 1 other\n";
    CHECK(only_kind(judge(std::string(head) + "[[partition(1, rw)]] global g: int;\nfn main() { return g; }\n")) ==
          ViolationKind::Read);
    CHECK(only_kind(judge(std::string(head) +
                          "[[partition(1, rw)]] global g: int;\nfn main() { [[privilege(1, r)]] { g = 1; } }\n")) ==
          ViolationKind::Write);
    CHECK(only_kind(judge(std::string(head) + "const global k: int = 1;\nfn main() { k = 2; }\n")) ==
          ViolationKind::Write);
    CHECK(only_kind(judge(std::string(head) + "fn main() { let f: int = 3; return f(); }\n")) == ViolationKind::Cfi);
    CHECK(only_kind(judge(std::string(head) + "fn main() { let p: ptr = alloc(8); free(p); free(p); }\n")) ==
          ViolationKind::DoubleFree);
    CHECK(only_kind(judge(std::string(head) + "global g: int;\nfn main() { free(&g); }\n")) ==
          ViolationKind::InvalidFree);
    CHECK(only_kind(judge(std::string(head) + "fn main() { let p: ptr = alloc(0); }\n")) ==
          ViolationKind::InvalidSize);
    CHECK(only_kind(judge(std::string(head) + "fn main() { let p: ptr = alloc(8); return p[8]; }\n")) ==
          ViolationKind::OutOfBounds);
    CHECK(only_kind(judge(std::string(head) + "fn main() { let p: ptr = alloc(100000000); }\n")) ==
          ViolationKind::OutOfMemory);
}

TEST_CASE("the first violation ends the run") {
    const auto r = judge(R"(#pragma partition 0 r
global g: int;
fn main() {
    g = 1;
    g = 2;
}
)");
    REQUIRE(r.violations.size() == 1);
    CHECK(r.violations.begin()->stmt == StatementId{2});
}

TEST_CASE("expected machine faults") {
    CHECK(expected_fault(ViolationKind::Read) == FaultKind::PkeyAccessFault);
    CHECK(expected_fault(ViolationKind::Write) == FaultKind::PkeyWriteFault);
    CHECK(expected_fault(ViolationKind::Cfi) == FaultKind::CfiFault);
    CHECK(expected_fault(ViolationKind::DoubleFree) == FaultKind::DoubleFree);
    CHECK(expected_fault(ViolationKind::InvalidFree) == FaultKind::InvalidFree);
    CHECK(expected_fault(ViolationKind::InvalidSize) == FaultKind::InvalidSize);
    CHECK(expected_fault(ViolationKind::OutOfBounds) == FaultKind::PkeyAccessFault);
    CHECK(expected_fault(ViolationKind::OutOfMemory) == FaultKind::OutOfMemory);
}
