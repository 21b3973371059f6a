#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bpfsb/errors.hpp"

namespace bpfsb {

// Standard eBPF 64-bit instruction encoding: little-endian 8-byte slots,
// opcode:8, dst in the low nibble of the register byte, src in the high
// nibble, offset:16, imm:32. The 64-bit immediate load occupies two slots.

enum : uint8_t {
    INST_CLS_MASK = 0x07,
    INST_CLS_LD = 0x00,
    INST_CLS_LDX = 0x01,
    INST_CLS_ST = 0x02,
    INST_CLS_STX = 0x03,
    INST_CLS_ALU = 0x04,
    INST_CLS_JMP = 0x05,
    INST_CLS_ALU64 = 0x07,

    INST_SRC_REG = 0x08,

    INST_SIZE_W = 0x00,
    INST_SIZE_H = 0x08,
    INST_SIZE_B = 0x10,
    INST_SIZE_DW = 0x18,
    INST_SIZE_MASK = 0x18,

    INST_MODE_MEM = 0x60,
    INST_MODE_MASK = 0xe0,

    INST_ALU_OP_MASK = 0xf0,
};

// Opcodes for the supported subset.
enum : uint8_t {
    OP_LDDW = 0x18,

    OP_LDXW = 0x61,
    OP_LDXH = 0x69,
    OP_LDXB = 0x71,
    OP_LDXDW = 0x79,

    OP_STW = 0x62,
    OP_STH = 0x6a,
    OP_STB = 0x72,
    OP_STDW = 0x7a,

    OP_STXW = 0x63,
    OP_STXH = 0x6b,
    OP_STXB = 0x73,
    OP_STXDW = 0x7b,

    OP_JA = 0x05,
    OP_CALL = 0x85,
    OP_EXIT = 0x95,

    OP_MOV64_IMM = 0xb7,
    OP_MOV64_REG = 0xbf,
    OP_ADD64_IMM = 0x07,
    OP_ADD64_REG = 0x0f,
    OP_AND64_REG = 0x5f,
    OP_OR64_REG = 0x4f,

    ALU_OP_ADD = 0x00,
    ALU_OP_SUB = 0x10,
    ALU_OP_MUL = 0x20,
    ALU_OP_DIV = 0x30,
    ALU_OP_OR = 0x40,
    ALU_OP_AND = 0x50,
    ALU_OP_LSH = 0x60,
    ALU_OP_RSH = 0x70,
    ALU_OP_NEG = 0x80,
    ALU_OP_MOD = 0x90,
    ALU_OP_XOR = 0xa0,
    ALU_OP_MOV = 0xb0,
    ALU_OP_ARSH = 0xc0,

    JMP_OP_JA = 0x00,
    JMP_OP_JEQ = 0x10,
    JMP_OP_JGT = 0x20,
    JMP_OP_JGE = 0x30,
    JMP_OP_JSET = 0x40,
    JMP_OP_JNE = 0x50,
    JMP_OP_JSGT = 0x60,
    JMP_OP_JSGE = 0x70,
    JMP_OP_CALL = 0x80,
    JMP_OP_EXIT = 0x90,
    JMP_OP_JLT = 0xa0,
    JMP_OP_JLE = 0xb0,
    JMP_OP_JSLT = 0xc0,
    JMP_OP_JSLE = 0xd0,
};

// r0-r10 are the architectural registers; r11/r12 are scratch registers
// reserved for instrumentation and may appear only in rewriter output.
constexpr uint8_t REG_RET = 0;
constexpr uint8_t REG_CTX = 1;
constexpr uint8_t REG_FP = 10;
constexpr uint8_t REG_SCRATCH_ADDR = 11;
constexpr uint8_t REG_SCRATCH_MASK = 12;
constexpr uint8_t REG_MAX = 12;

struct Instruction {
    uint8_t opcode = 0;
    uint8_t dst_reg = 0;
    uint8_t src_reg = 0;
    int16_t offset = 0;
    int32_t imm = 0;
    std::optional<int64_t> wide_imm; // present iff opcode == OP_LDDW

    bool operator==(const Instruction&) const = default;
};

enum class InstructionClass : uint8_t {
    alu,
    load,
    store,
    jump,
    call,
    exit,
    load_imm64,
};

enum class ProgramType : uint8_t { xdp, socket_filter };

const char* program_type_name(ProgramType t);
ProgramType program_type_from_name(const std::string& name);

struct Program {
    std::vector<Instruction> instructions;
    ProgramType type = ProgramType::xdp;
    std::string name;
};

// Total over valid opcodes; throws UnknownOpcode outside the subset.
InstructionClass classify(const Instruction& ins);
InstructionClass classify_opcode(uint8_t opcode);
bool opcode_valid(uint8_t opcode);

// Memory access width in bytes for load/store opcodes.
int access_width(uint8_t opcode);

std::vector<Instruction> decode(std::span<const uint8_t> bytes);
std::vector<uint8_t> encode(const std::vector<Instruction>& instructions);

// Slot arithmetic: a wide immediate load occupies two 8-byte slots.
size_t slot_count(const std::vector<Instruction>& instructions);
// Slot index of each instruction.
std::vector<size_t> instruction_slots(const std::vector<Instruction>& instructions);
// Per-slot instruction index; the second slot of a wide load maps to -1.
std::vector<ptrdiff_t> slot_to_instruction(const std::vector<Instruction>& instructions);

std::string mnemonic(const Instruction& ins);

} // namespace bpfsb
