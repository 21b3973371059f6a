#include "bpfsb/isa.hpp"

#include <sstream>

namespace bpfsb {

const char* program_type_name(ProgramType t) {
    switch (t) {
    case ProgramType::xdp: return "xdp";
    case ProgramType::socket_filter: return "socket_filter";
    }
    return "?";
}

ProgramType program_type_from_name(const std::string& name) {
    if (name == "xdp")
        return ProgramType::xdp;
    if (name == "socket_filter")
        return ProgramType::socket_filter;
    throw RangeError("unknown program type: " + name);
}

static bool valid_alu_op(uint8_t op, bool has_src_bit) {
    switch (op) {
    case ALU_OP_ADD:
    case ALU_OP_SUB:
    case ALU_OP_MUL:
    case ALU_OP_DIV:
    case ALU_OP_OR:
    case ALU_OP_AND:
    case ALU_OP_LSH:
    case ALU_OP_RSH:
    case ALU_OP_MOD:
    case ALU_OP_XOR:
    case ALU_OP_MOV:
    case ALU_OP_ARSH: return true;
    case ALU_OP_NEG: return !has_src_bit;
    default: return false;
    }
}

static bool valid_jmp_op(uint8_t op) {
    switch (op) {
    case JMP_OP_JEQ:
    case JMP_OP_JGT:
    case JMP_OP_JGE:
    case JMP_OP_JSET:
    case JMP_OP_JNE:
    case JMP_OP_JSGT:
    case JMP_OP_JSGE:
    case JMP_OP_JLT:
    case JMP_OP_JLE:
    case JMP_OP_JSLT:
    case JMP_OP_JSLE: return true;
    default: return false;
    }
}

InstructionClass classify_opcode(uint8_t opcode) {
    if (opcode == OP_LDDW)
        return InstructionClass::load_imm64;
    const uint8_t cls = opcode & INST_CLS_MASK;
    switch (cls) {
    case INST_CLS_LDX:
        if ((opcode & INST_MODE_MASK) == INST_MODE_MEM)
            return InstructionClass::load;
        break;
    case INST_CLS_ST:
    case INST_CLS_STX:
        if ((opcode & INST_MODE_MASK) == INST_MODE_MEM)
            return InstructionClass::store;
        break;
    case INST_CLS_ALU:
    case INST_CLS_ALU64:
        if (valid_alu_op(opcode & INST_ALU_OP_MASK, opcode & INST_SRC_REG))
            return InstructionClass::alu;
        break;
    case INST_CLS_JMP:
        if (opcode == OP_CALL)
            return InstructionClass::call;
        if (opcode == OP_EXIT)
            return InstructionClass::exit;
        if (opcode == OP_JA)
            return InstructionClass::jump;
        if (valid_jmp_op(opcode & INST_ALU_OP_MASK))
            return InstructionClass::jump;
        break;
    default: break;
    }
    std::ostringstream oss;
    oss << "unknown opcode 0x" << std::hex << int(opcode);
    throw UnknownOpcode(oss.str());
}

InstructionClass classify(const Instruction& ins) { return classify_opcode(ins.opcode); }

bool opcode_valid(uint8_t opcode) {
    try {
        classify_opcode(opcode);
        return true;
    } catch (const UnknownOpcode&) {
        return false;
    }
}

int access_width(uint8_t opcode) {
    switch (opcode & INST_SIZE_MASK) {
    case INST_SIZE_B: return 1;
    case INST_SIZE_H: return 2;
    case INST_SIZE_W: return 4;
    case INST_SIZE_DW: return 8;
    }
    return 0;
}

static void check_fields(const Instruction& ins) {
    if (ins.dst_reg > REG_MAX)
        throw RangeError("dst register out of range: r" + std::to_string(ins.dst_reg));
    if (ins.src_reg > REG_MAX)
        throw RangeError("src register out of range: r" + std::to_string(ins.src_reg));
    const bool is_wide = ins.opcode == OP_LDDW;
    if (is_wide != ins.wide_imm.has_value())
        throw RangeError(is_wide ? "wide load without wide immediate"
                                 : "wide immediate on non-wide opcode");
}

std::vector<Instruction> decode(std::span<const uint8_t> bytes) {
    if (bytes.size() % 8 != 0)
        throw TruncatedProgram("byte length " + std::to_string(bytes.size()) +
                               " is not a multiple of 8");
    std::vector<Instruction> out;
    out.reserve(bytes.size() / 8);
    for (size_t slot = 0; slot < bytes.size() / 8; ++slot) {
        const uint8_t* p = bytes.data() + slot * 8;
        Instruction ins;
        ins.opcode = p[0];
        ins.dst_reg = p[1] & 0x0f;
        ins.src_reg = p[1] >> 4;
        ins.offset = int16_t(uint16_t(p[2]) | uint16_t(p[3]) << 8);
        ins.imm = int32_t(uint32_t(p[4]) | uint32_t(p[5]) << 8 | uint32_t(p[6]) << 16 |
                          uint32_t(p[7]) << 24);
        classify_opcode(ins.opcode); // throws UnknownOpcode
        if (ins.dst_reg > REG_MAX || ins.src_reg > REG_MAX)
            throw RangeError("register out of range at slot " + std::to_string(slot));
        if (ins.opcode == OP_LDDW) {
            if (slot + 1 >= bytes.size() / 8)
                throw TruncatedProgram("wide load at slot " + std::to_string(slot) +
                                       " missing its second slot");
            const uint8_t* q = bytes.data() + (slot + 1) * 8;
            if (q[0] != 0 || q[1] != 0 || q[2] != 0 || q[3] != 0)
                throw TruncatedProgram("malformed second slot of wide load at slot " +
                                       std::to_string(slot));
            const uint32_t lo = uint32_t(ins.imm);
            const uint32_t hi = uint32_t(q[4]) | uint32_t(q[5]) << 8 | uint32_t(q[6]) << 16 |
                                uint32_t(q[7]) << 24;
            ins.wide_imm = int64_t(uint64_t(hi) << 32 | lo);
            ++slot;
        }
        out.push_back(ins);
    }
    return out;
}

static void emit_slot(std::vector<uint8_t>& out, uint8_t opcode, uint8_t dst, uint8_t src,
                      int16_t offset, int32_t imm) {
    out.push_back(opcode);
    out.push_back(uint8_t(dst | src << 4));
    out.push_back(uint8_t(uint16_t(offset)));
    out.push_back(uint8_t(uint16_t(offset) >> 8));
    out.push_back(uint8_t(uint32_t(imm)));
    out.push_back(uint8_t(uint32_t(imm) >> 8));
    out.push_back(uint8_t(uint32_t(imm) >> 16));
    out.push_back(uint8_t(uint32_t(imm) >> 24));
}

std::vector<uint8_t> encode(const std::vector<Instruction>& instructions) {
    std::vector<uint8_t> out;
    out.reserve(instructions.size() * 8);
    for (const Instruction& ins : instructions) {
        check_fields(ins);
        classify_opcode(ins.opcode);
        if (ins.opcode == OP_LDDW) {
            const uint64_t v = uint64_t(*ins.wide_imm);
            emit_slot(out, ins.opcode, ins.dst_reg, ins.src_reg, ins.offset,
                      int32_t(uint32_t(v)));
            emit_slot(out, 0, 0, 0, 0, int32_t(uint32_t(v >> 32)));
        } else {
            emit_slot(out, ins.opcode, ins.dst_reg, ins.src_reg, ins.offset, ins.imm);
        }
    }
    return out;
}

size_t slot_count(const std::vector<Instruction>& instructions) {
    size_t n = 0;
    for (const Instruction& ins : instructions)
        n += ins.opcode == OP_LDDW ? 2 : 1;
    return n;
}

std::vector<size_t> instruction_slots(const std::vector<Instruction>& instructions) {
    std::vector<size_t> slots;
    slots.reserve(instructions.size());
    size_t s = 0;
    for (const Instruction& ins : instructions) {
        slots.push_back(s);
        s += ins.opcode == OP_LDDW ? 2 : 1;
    }
    return slots;
}

std::vector<ptrdiff_t> slot_to_instruction(const std::vector<Instruction>& instructions) {
    std::vector<ptrdiff_t> map;
    map.reserve(slot_count(instructions));
    for (size_t i = 0; i < instructions.size(); ++i) {
        map.push_back(ptrdiff_t(i));
        if (instructions[i].opcode == OP_LDDW)
            map.push_back(-1);
    }
    return map;
}

static const char* alu_op_name(uint8_t op) {
    switch (op) {
    case ALU_OP_ADD: return "add";
    case ALU_OP_SUB: return "sub";
    case ALU_OP_MUL: return "mul";
    case ALU_OP_DIV: return "div";
    case ALU_OP_OR: return "or";
    case ALU_OP_AND: return "and";
    case ALU_OP_LSH: return "lsh";
    case ALU_OP_RSH: return "rsh";
    case ALU_OP_NEG: return "neg";
    case ALU_OP_MOD: return "mod";
    case ALU_OP_XOR: return "xor";
    case ALU_OP_MOV: return "mov";
    case ALU_OP_ARSH: return "arsh";
    }
    return "?";
}

static const char* jmp_op_name(uint8_t op) {
    switch (op) {
    case JMP_OP_JEQ: return "jeq";
    case JMP_OP_JGT: return "jgt";
    case JMP_OP_JGE: return "jge";
    case JMP_OP_JSET: return "jset";
    case JMP_OP_JNE: return "jne";
    case JMP_OP_JSGT: return "jsgt";
    case JMP_OP_JSGE: return "jsge";
    case JMP_OP_JLT: return "jlt";
    case JMP_OP_JLE: return "jle";
    case JMP_OP_JSLT: return "jslt";
    case JMP_OP_JSLE: return "jsle";
    }
    return "?";
}

static const char* size_suffix(uint8_t opcode) {
    switch (opcode & INST_SIZE_MASK) {
    case INST_SIZE_B: return "b";
    case INST_SIZE_H: return "h";
    case INST_SIZE_W: return "w";
    case INST_SIZE_DW: return "dw";
    }
    return "?";
}

std::string mnemonic(const Instruction& ins) {
    std::ostringstream oss;
    switch (classify(ins)) {
    case InstructionClass::load_imm64:
        oss << "lddw r" << int(ins.dst_reg) << ", 0x" << std::hex << uint64_t(*ins.wide_imm);
        break;
    case InstructionClass::load:
        oss << "ldx" << size_suffix(ins.opcode) << " r" << int(ins.dst_reg) << ", [r"
            << int(ins.src_reg) << std::showpos << ins.offset << "]";
        break;
    case InstructionClass::store:
        if ((ins.opcode & INST_CLS_MASK) == INST_CLS_STX)
            oss << "stx" << size_suffix(ins.opcode) << " [r" << int(ins.dst_reg) << std::showpos
                << ins.offset << std::noshowpos << "], r" << int(ins.src_reg);
        else
            oss << "st" << size_suffix(ins.opcode) << " [r" << int(ins.dst_reg) << std::showpos
                << ins.offset << std::noshowpos << "], " << ins.imm;
        break;
    case InstructionClass::alu: {
        const bool is64 = (ins.opcode & INST_CLS_MASK) == INST_CLS_ALU64;
        const uint8_t op = ins.opcode & INST_ALU_OP_MASK;
        oss << alu_op_name(op) << (is64 ? "64" : "32") << " r" << int(ins.dst_reg);
        if (op != ALU_OP_NEG) {
            if (ins.opcode & INST_SRC_REG)
                oss << ", r" << int(ins.src_reg);
            else
                oss << ", " << ins.imm;
        }
        break;
    }
    case InstructionClass::jump:
        if (ins.opcode == OP_JA) {
            oss << "ja " << std::showpos << ins.offset;
        } else {
            oss << jmp_op_name(ins.opcode & INST_ALU_OP_MASK) << " r" << int(ins.dst_reg) << ", ";
            if (ins.opcode & INST_SRC_REG)
                oss << "r" << int(ins.src_reg);
            else
                oss << ins.imm;
            oss << ", " << std::showpos << ins.offset;
        }
        break;
    case InstructionClass::call: oss << "call " << ins.imm; break;
    case InstructionClass::exit: oss << "exit"; break;
    }
    return oss.str();
}

const char* trap_reason_name(TrapReason r) {
    switch (r) {
    case TrapReason::CfiViolation: return "CfiViolation";
    case TrapReason::BudgetExhausted: return "BudgetExhausted";
    case TrapReason::InvalidReservation: return "InvalidReservation";
    case TrapReason::IllegalInstruction: return "IllegalInstruction";
    }
    return "?";
}

} // namespace bpfsb
