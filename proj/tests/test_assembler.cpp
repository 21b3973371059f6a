#include <doctest.h>

#include "bpfsb/assembler.hpp"
#include "bpfsb/isa.hpp"

using namespace bpfsb;

TEST_CASE("two-line program") {
    const auto insns = parse_asm("mov64 r0, 42\nexit\n");
    REQUIRE(insns.size() == 2);
    CHECK(insns[0].opcode == OP_MOV64_IMM);
    CHECK(insns[0].imm == 42);
    CHECK(insns[1].opcode == OP_EXIT);
}

TEST_CASE("numeric jump offset") {
    const auto insns = parse_asm("jeq r1, 0, +1\nmov64 r0, 0\nexit\n");
    REQUIRE(insns.size() == 3);
    CHECK(insns[0].opcode == uint8_t(uint8_t(JMP_OP_JEQ) | uint8_t(INST_CLS_JMP)));
    CHECK(insns[0].dst_reg == 1);
    CHECK(insns[0].offset == 1);
}

TEST_CASE("register-register jump") {
    const auto insns = parse_asm("jgt r2, r3, +0\nexit\n");
    CHECK(insns[0].opcode ==
          uint8_t(uint8_t(JMP_OP_JGT) | uint8_t(INST_SRC_REG) | uint8_t(INST_CLS_JMP)));
    CHECK(insns[0].src_reg == 3);
}

TEST_CASE("memory operands") {
    const auto insns = parse_asm("ldxdw r0, [r1+8]\n"
                                 "stxw [r10-16], r2\n"
                                 "stb [r1], 7\n"
                                 "exit\n");
    CHECK(insns[0].opcode == OP_LDXDW);
    CHECK(insns[0].src_reg == 1);
    CHECK(insns[0].offset == 8);
    CHECK(insns[1].opcode == OP_STXW);
    CHECK(insns[1].dst_reg == 10);
    CHECK(insns[1].offset == -16);
    CHECK(insns[2].opcode == OP_STB);
    CHECK(insns[2].offset == 0);
    CHECK(insns[2].imm == 7);
}

TEST_CASE("lddw takes a 64-bit immediate") {
    const auto insns = parse_asm("lddw r1, 0xDEADBEEFCAFEF00D\nexit\n");
    REQUIRE(insns[0].wide_imm.has_value());
    CHECK(uint64_t(*insns[0].wide_imm) == 0xDEADBEEFCAFEF00Dull);
}

TEST_CASE("forward label reference resolves by slot arithmetic") {
    // The wide load between the jump and the label occupies two slots.
    const auto insns = parse_asm("jeq r1, 0, done\n"
                                 "lddw r2, 0x1122334455667788\n"
                                 "mov64 r0, 1\n"
                                 "done: exit\n");
    REQUIRE(insns.size() == 4);
    // Slots: jeq at 0, lddw at 1-2, mov at 3, exit at 4. Target 4 = 0+1+3.
    CHECK(insns[0].offset == 3);
}

TEST_CASE("backward label reference") {
    const auto insns = parse_asm("loop: add64 r1, 1\nja loop\n");
    CHECK(insns[1].offset == -2);
}

TEST_CASE("comments and blank lines are ignored") {
    const auto insns = parse_asm("; header\n\nmov64 r0, 0 ; trailing\nexit\n");
    CHECK(insns.size() == 2);
}

TEST_CASE("syntax errors carry the line number") {
    try {
        parse_asm("mov64 r0, 0\nbogus r1\n");
        FAIL("expected AsmSyntaxError");
    } catch (const AsmSyntaxError& e) {
        CHECK(e.line == 2);
    }
    CHECK_THROWS_AS(parse_asm("mov64 r11, 0\n"), AsmSyntaxError); // r11 not authorable
    CHECK_THROWS_AS(parse_asm("ja nowhere\n"), UndefinedLabel);
}

TEST_CASE("assembly matches hand encoding") {
    const auto insns = parse_asm("mov64 r3, -1\nexit\n");
    const auto bytes = encode(insns);
    const std::vector<uint8_t> expected = {0xb7, 0x03, 0, 0, 0xff, 0xff, 0xff, 0xff,
                                           0x95, 0,    0, 0, 0,    0,    0,    0};
    CHECK(bytes == expected);
}
