#include <doctest.h>

#include <random>

#include "bpfsb/isa.hpp"
#include "generators.hpp"

using namespace bpfsb;

TEST_CASE("decode single mov64 imm") {
    std::vector<uint8_t> bytes(8, 0);
    bytes[0] = 0xb7; // mov64 imm
    bytes[4] = 42;
    const auto insns = decode(bytes);
    REQUIRE(insns.size() == 1);
    CHECK(insns[0].opcode == 0xb7);
    CHECK(insns[0].dst_reg == 0);
    CHECK(insns[0].imm == 42);
}

TEST_CASE("decode rejects length not a multiple of 8") {
    std::vector<uint8_t> bytes(12, 0);
    bytes[0] = 0xb7;
    CHECK_THROWS_AS(decode(bytes), TruncatedProgram);
}

TEST_CASE("decode rejects wide load missing its second slot") {
    std::vector<uint8_t> bytes(8, 0);
    bytes[0] = OP_LDDW;
    bytes[1] = 1;
    CHECK_THROWS_AS(decode(bytes), TruncatedProgram);
}

TEST_CASE("decode reassembles the wide immediate") {
    Instruction ins;
    ins.opcode = OP_LDDW;
    ins.dst_reg = 1;
    ins.wide_imm = int64_t(0xDEADBEEFCAFEF00Dull);
    ins.imm = int32_t(uint32_t(0xCAFEF00D));
    const auto bytes = encode({ins});
    REQUIRE(bytes.size() == 16);
    const auto back = decode(bytes);
    REQUIRE(back.size() == 1);
    CHECK(back[0] == ins);
}

TEST_CASE("decode rejects unknown opcodes") {
    std::vector<uint8_t> bytes(8, 0);
    bytes[0] = 0xd4; // endianness conversion, outside the subset
    CHECK_THROWS_AS(decode(bytes), UnknownOpcode);
    bytes[0] = 0xdb; // atomic, outside the subset
    CHECK_THROWS_AS(decode(bytes), UnknownOpcode);
}

TEST_CASE("encode fixed forms") {
    CHECK(encode({}).empty());
    const auto bytes = encode({Instruction{OP_EXIT, 0, 0, 0, 0, std::nullopt}});
    REQUIRE(bytes.size() == 8);
    CHECK(bytes[0] == 0x95);
    for (size_t i = 1; i < 8; ++i)
        CHECK(bytes[i] == 0);
}

TEST_CASE("encode rejects out-of-range fields") {
    Instruction ins{OP_MOV64_IMM, 13, 0, 0, 1, std::nullopt};
    CHECK_THROWS_AS(encode({ins}), RangeError);
    Instruction wide{OP_LDDW, 0, 0, 0, 0, std::nullopt}; // missing wide_imm
    CHECK_THROWS_AS(encode({wide}), RangeError);
}

TEST_CASE("encode/decode round trip on random programs") {
    testgen::Rng rng(7);
    for (int iter = 0; iter < 50; ++iter) {
        std::vector<Instruction> prog;
        for (int i = 0; i < 50; ++i)
            prog.push_back(testgen::random_codec_instruction(rng));
        const auto back = decode(encode(prog));
        CHECK(back == prog);
    }
}

TEST_CASE("classify fixed points") {
    CHECK(classify_opcode(0x61) == InstructionClass::load);
    CHECK(classify_opcode(0x62) == InstructionClass::store);
    CHECK(classify_opcode(0x7b) == InstructionClass::store);
    CHECK(classify_opcode(0x85) == InstructionClass::call);
    CHECK(classify_opcode(0x95) == InstructionClass::exit);
    CHECK(classify_opcode(0x18) == InstructionClass::load_imm64);
    CHECK(classify_opcode(0x05) == InstructionClass::jump);
}

TEST_CASE("classify partitions the opcode space") {
    // Every byte either maps to exactly one class or is a decode error.
    int valid = 0;
    for (int op = 0; op < 256; ++op) {
        try {
            classify_opcode(uint8_t(op));
            ++valid;
        } catch (const UnknownOpcode&) {
        }
    }
    CHECK(valid > 50);
    CHECK(valid < 256);
}

TEST_CASE("slot arithmetic counts wide loads twice") {
    Instruction wide{OP_LDDW, 0, 0, 0, 0, int64_t(1)};
    Instruction mov{OP_MOV64_IMM, 0, 0, 0, 0, std::nullopt};
    const std::vector<Instruction> prog = {mov, wide, mov};
    CHECK(slot_count(prog) == 4);
    CHECK(instruction_slots(prog) == std::vector<size_t>{0, 1, 3});
    const auto at = slot_to_instruction(prog);
    REQUIRE(at.size() == 4);
    CHECK(at[1] == 1);
    CHECK(at[2] == -1);
    CHECK(slot_count(prog) * 8 == encode(prog).size());
}
