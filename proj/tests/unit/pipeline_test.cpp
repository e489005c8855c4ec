#include <doctest.h>

#include "helpers.hpp"
#include "partc/machine.hpp"

using namespace partc;

TEST_CASE("build output matches the golden files") {
    const auto a = test::build_data("signing.pml");
    CHECK(ir::dump(a.instrumented.ir) == test::data_text("../golden/signing/module.ir"));
    CHECK(emit_layout(a.layout) == test::data_text("../golden/signing/layout.json"));
    CHECK(policy_to_json(a.policy, a.keys, a.instrumented.switch_site_count) ==
          test::data_text("../golden/signing/policy.json"));
}

TEST_CASE("two builds write identical artifacts") {
    const auto d1 = test::scratch_dir("repro1");
    const auto d2 = test::scratch_dir("repro2");
    write_artifact(test::build_data("signing.pml"), d1);
    write_artifact(test::build_data("signing.pml"), d2);
    for (const char* f : {kModuleFile, kLayoutFile, kPolicyFile}) {
        CAPTURE(f);
        CHECK(read_file(d1 / f) == read_file(d2 / f));
    }
}

TEST_CASE("artifacts load back") {
    const auto dir = test::scratch_dir("roundtrip");
    const auto a = test::build_data("signing.pml");
    write_artifact(a, dir);
    const LoadedArtifact back = load_artifact(dir);
    CHECK(back.module == a.instrumented.ir);
    CHECK(back.layout == a.layout);
    CHECK(back.keys == a.keys);
    CHECK(back.policy.partitions == a.policy.partitions);
    CHECK(back.policy.overrides == a.policy.overrides);
    CHECK(back.policy.statements == a.policy.statements);
    CHECK(back.policy.data_assignment == a.policy.data_assignment);
    CHECK(back.policy.immutable == a.policy.immutable);
    CHECK(back.policy.functions == a.policy.functions);

    // The loaded artifact runs exactly like the in-memory one.
    const std::string input = "Sign";
    const std::vector<uint8_t> bytes(input.begin(), input.end());
    Machine m1 = Machine::init(a.layout, a.policy, a.keys);
    m1.load(a.instrumented.ir);
    Machine m2 = Machine::init(back.layout, back.policy, back.keys);
    m2.load(back.module);
    CHECK(m1.run(a.instrumented, "main", bytes).return_value == m2.run(back.module, "main", bytes).return_value);
    CHECK(m1.trace() == m2.trace());
}

TEST_CASE("missing and corrupt artifacts") {
    const auto dir = test::scratch_dir("corrupt");
    try {
        (void)load_artifact(dir);
        FAIL("loaded");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::IoError);
    }
    write_artifact(test::build_data("signing.pml"), dir);
    write_file(dir / kPolicyFile, "{\"partitions\": 3}");
    try {
        (void)load_artifact(dir);
        FAIL("loaded");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::FormatError);
    }
}

TEST_CASE("build stops on the first policy finding") {
    try {
        (void)build_program(test::data_text("partitions16.pml"), "partitions16.pml");
        FAIL("built");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::KeyExhaustion);
    }
    try {
        (void)build_program("#pragma partition 0 w\nfn main() { return 0; }\n", "w.pml");
        FAIL("built");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::UnrepresentableRights);
    }
}

TEST_CASE("fifteen partitions build and run") {
    const auto a = test::build_data("partitions15.pml");
    CHECK(a.keys.size() == 15);
    Machine m = Machine::init(a.layout, a.policy, a.keys);
    m.load(a.instrumented.ir);
    const RunResult r = m.run(a.instrumented, "main", std::vector<uint8_t>{});
    REQUIRE(r.ok());
    // cell_p starts at p and gains p: sum over p of 2p, plus cell0.
    CHECK(*r.return_value == 210u);
    CHECK(m.wrpkru_count() == 28);
}
