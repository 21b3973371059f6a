#include <doctest.h>

#include "bpfsb/assembler.hpp"
#include "bpfsb/loader.hpp"

using namespace bpfsb;

namespace {

Program prog(const std::string& text) {
    return {parse_asm(text), ProgramType::xdp, "test"};
}

bool has_violation(const CheckReport& r, ViolationCode code) {
    for (const auto& v : r.violations)
        if (v.code == code)
            return true;
    return false;
}

} // namespace

TEST_CASE("minimal program accepted") {
    CHECK(precheck(prog("mov64 r0, 0\nexit\n")).accepted);
}

TEST_CASE("size limit") {
    std::string text;
    for (int i = 0; i < 4097; ++i)
        text += "mov64 r0, 0\n";
    text += "exit\n";
    const auto report = precheck(prog(text));
    CHECK_FALSE(report.accepted);
    CHECK(has_violation(report, ViolationCode::TooLarge));

    // Exactly at the limit is fine.
    std::string ok;
    for (int i = 0; i < 4095; ++i)
        ok += "mov64 r0, 0\n";
    ok += "exit\n";
    CHECK(precheck(prog(ok)).accepted);
}

TEST_CASE("unreachable instruction after exit") {
    const auto report = precheck(prog("exit\nmov64 r0, 1\n"));
    CHECK_FALSE(report.accepted);
    REQUIRE(report.violations.size() == 1);
    CHECK(report.violations[0].code == ViolationCode::Unreachable);
    CHECK(report.violations[0].instruction_index == 1);
}

TEST_CASE("jump out of bounds") {
    const auto report = precheck(prog("ja +5\nexit\n"));
    CHECK(has_violation(report, ViolationCode::BadJumpTarget));
}

TEST_CASE("jump into the second slot of a wide load") {
    const auto report = precheck(prog("jeq r1, 0, +1\n"
                                      "lddw r2, 0x1122334455667788\n"
                                      "exit\n"));
    CHECK(has_violation(report, ViolationCode::BadJumpTarget));
}

TEST_CASE("back edges rejected by default, allowed by flag") {
    Program p = prog("loop: add64 r1, 1\nja loop\n");
    const auto rejected = precheck(p);
    CHECK(has_violation(rejected, ViolationCode::BackEdge));

    PrecheckLimits limits;
    limits.allow_back_edges = true;
    CHECK(precheck(p, limits).accepted);
}

TEST_CASE("fall-through off the end") {
    const auto report = precheck(prog("mov64 r0, 0\n"));
    CHECK(has_violation(report, ViolationCode::FallThrough));
    // A conditional jump as the last instruction also falls through.
    const auto report2 = precheck(prog("start: mov64 r0, 0\njeq r0, 0, start\n"));
    CHECK(has_violation(report2, ViolationCode::FallThrough));
}

TEST_CASE("reserved registers rejected for user programs") {
    Program p;
    p.instructions = {{OP_MOV64_IMM, REG_SCRATCH_ADDR, 0, 0, 0, std::nullopt},
                      {OP_EXIT, 0, 0, 0, 0, std::nullopt}};
    const auto report = precheck(p);
    CHECK(has_violation(report, ViolationCode::ReservedRegister));

    PrecheckLimits limits;
    limits.allow_reserved_regs = true;
    CHECK(precheck(p, limits).accepted);
}

TEST_CASE("precheck does not mutate the program") {
    Program p = prog("exit\nmov64 r0, 1\n");
    const auto before = p.instructions;
    precheck(p);
    CHECK(p.instructions == before);
}

TEST_CASE("branchy program with both paths reachable") {
    CHECK(precheck(prog("jeq r1, 0, skip\n"
                        "mov64 r0, 1\n"
                        "exit\n"
                        "skip: mov64 r0, 2\n"
                        "exit\n"))
              .accepted);
}
