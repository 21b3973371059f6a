#include "bpfsb/assembler.hpp"

#include <cctype>
#include <map>
#include <optional>
#include <sstream>

namespace bpfsb {

namespace {

struct AluEntry {
    uint8_t op;
    uint8_t cls;
    bool unary;
};

std::optional<AluEntry> alu_mnemonic(const std::string& m) {
    static const std::map<std::string, uint8_t> ops = {
        {"add", ALU_OP_ADD}, {"sub", ALU_OP_SUB},   {"mul", ALU_OP_MUL}, {"div", ALU_OP_DIV},
        {"or", ALU_OP_OR},   {"and", ALU_OP_AND},   {"lsh", ALU_OP_LSH}, {"rsh", ALU_OP_RSH},
        {"neg", ALU_OP_NEG}, {"mod", ALU_OP_MOD},   {"xor", ALU_OP_XOR}, {"mov", ALU_OP_MOV},
        {"arsh", ALU_OP_ARSH}};
    uint8_t cls;
    std::string stem;
    if (m.size() > 2 && m.ends_with("64")) {
        cls = INST_CLS_ALU64;
        stem = m.substr(0, m.size() - 2);
    } else if (m.size() > 2 && m.ends_with("32")) {
        cls = INST_CLS_ALU;
        stem = m.substr(0, m.size() - 2);
    } else {
        return std::nullopt;
    }
    auto it = ops.find(stem);
    if (it == ops.end())
        return std::nullopt;
    return AluEntry{it->second, cls, it->second == ALU_OP_NEG};
}

std::optional<uint8_t> jmp_mnemonic(const std::string& m) {
    static const std::map<std::string, uint8_t> ops = {
        {"jeq", JMP_OP_JEQ},   {"jgt", JMP_OP_JGT},   {"jge", JMP_OP_JGE},
        {"jset", JMP_OP_JSET}, {"jne", JMP_OP_JNE},   {"jsgt", JMP_OP_JSGT},
        {"jsge", JMP_OP_JSGE}, {"jlt", JMP_OP_JLT},   {"jle", JMP_OP_JLE},
        {"jslt", JMP_OP_JSLT}, {"jsle", JMP_OP_JSLE}};
    auto it = ops.find(m);
    if (it == ops.end())
        return std::nullopt;
    return it->second;
}

std::optional<uint8_t> size_mnemonic_bits(const std::string& suffix) {
    if (suffix == "b")
        return INST_SIZE_B;
    if (suffix == "h")
        return INST_SIZE_H;
    if (suffix == "w")
        return INST_SIZE_W;
    if (suffix == "dw")
        return INST_SIZE_DW;
    return std::nullopt;
}

struct Parser {
    int line_no = 0;

    [[noreturn]] void fail(const std::string& msg) const { throw AsmSyntaxError(line_no, msg); }

    uint8_t parse_reg(const std::string& tok) const {
        if (tok.size() < 2 || tok[0] != 'r')
            fail("expected register, got '" + tok + "'");
        for (size_t i = 1; i < tok.size(); ++i)
            if (!std::isdigit(uint8_t(tok[i])))
                fail("expected register, got '" + tok + "'");
        const int n = std::stoi(tok.substr(1));
        if (n > 10)
            fail("register out of range: " + tok + " (r0-r10)");
        return uint8_t(n);
    }

    int64_t parse_int(const std::string& tok) const {
        try {
            size_t pos = 0;
            const int64_t v = std::stoll(tok, &pos, 0);
            if (pos != tok.size())
                fail("bad integer '" + tok + "'");
            return v;
        } catch (const std::invalid_argument&) {
            fail("bad integer '" + tok + "'");
        } catch (const std::out_of_range&) {
            fail("integer out of range '" + tok + "'");
        }
    }

    int32_t parse_imm32(const std::string& tok) const {
        const int64_t v = parse_int(tok);
        if (v < INT32_MIN || v > int64_t(UINT32_MAX))
            fail("immediate out of 32-bit range '" + tok + "'");
        return int32_t(uint32_t(v));
    }

    // "[rN+off]" or "[rN-off]" or "[rN]"
    std::pair<uint8_t, int16_t> parse_mem(const std::string& tok) const {
        if (tok.size() < 4 || tok.front() != '[' || tok.back() != ']')
            fail("expected memory operand [rN+off], got '" + tok + "'");
        const std::string inner = tok.substr(1, tok.size() - 2);
        size_t split = inner.find_first_of("+-", 1);
        std::string reg = inner;
        int64_t off = 0;
        if (split != std::string::npos) {
            reg = inner.substr(0, split);
            off = parse_int(inner.substr(split));
        }
        if (off < INT16_MIN || off > INT16_MAX)
            fail("offset out of 16-bit range");
        return {parse_reg(reg), int16_t(off)};
    }
};

// Tokens: split on whitespace and commas, but keep [...] operands whole.
std::vector<std::string> tokenize(const std::string& line) {
    std::vector<std::string> toks;
    std::string cur;
    for (char c : line) {
        if (c == ',' || std::isspace(uint8_t(c))) {
            if (!cur.empty()) {
                toks.push_back(cur);
                cur.clear();
            }
        } else {
            cur += c;
        }
    }
    if (!cur.empty())
        toks.push_back(cur);
    return toks;
}

struct PendingJump {
    size_t instruction_index;
    size_t slot;
    std::string label;
    int line_no;
};

} // namespace

std::vector<Instruction> parse_asm(const std::string& text) {
    std::vector<Instruction> out;
    std::map<std::string, size_t> labels; // label -> slot
    std::vector<PendingJump> pending;
    size_t slot = 0;

    Parser p;
    std::istringstream stream(text);
    std::string raw;
    while (std::getline(stream, raw)) {
        ++p.line_no;
        if (auto pos = raw.find(';'); pos != std::string::npos)
            raw.resize(pos);
        std::vector<std::string> toks = tokenize(raw);
        if (toks.empty())
            continue;
        // Leading label definition(s).
        while (!toks.empty() && toks[0].size() > 1 && toks[0].back() == ':') {
            std::string name = toks[0].substr(0, toks[0].size() - 1);
            if (labels.count(name))
                p.fail("duplicate label '" + name + "'");
            labels[name] = slot;
            toks.erase(toks.begin());
        }
        if (toks.empty())
            continue;

        const std::string& m = toks[0];
        auto want = [&](size_t n) {
            if (toks.size() != n + 1)
                p.fail("'" + m + "' expects " + std::to_string(n) + " operand(s)");
        };

        Instruction ins;
        if (m == "exit") {
            want(0);
            ins.opcode = OP_EXIT;
        } else if (m == "call") {
            want(1);
            ins.opcode = OP_CALL;
            ins.imm = p.parse_imm32(toks[1]);
        } else if (m == "lddw") {
            want(2);
            ins.opcode = OP_LDDW;
            ins.dst_reg = p.parse_reg(toks[1]);
            // Accept the full unsigned 64-bit range.
            try {
                size_t pos = 0;
                ins.wide_imm = int64_t(std::stoull(toks[2], &pos, 0));
                if (pos != toks[2].size())
                    p.fail("bad integer '" + toks[2] + "'");
            } catch (const AsmSyntaxError&) {
                throw;
            } catch (const std::exception&) {
                ins.wide_imm = p.parse_int(toks[2]);
            }
            ins.imm = int32_t(uint32_t(uint64_t(*ins.wide_imm)));
        } else if (m == "ja") {
            want(1);
            ins.opcode = OP_JA;
            if (toks[1][0] == '+' || toks[1][0] == '-' || std::isdigit(uint8_t(toks[1][0]))) {
                ins.offset = int16_t(p.parse_int(toks[1]));
            } else {
                pending.push_back({out.size(), slot, toks[1], p.line_no});
            }
        } else if (auto jop = jmp_mnemonic(m)) {
            want(3);
            ins.dst_reg = p.parse_reg(toks[1]);
            if (toks[2][0] == 'r' && toks[2].size() <= 3 && std::isdigit(uint8_t(toks[2][1]))) {
                ins.opcode = uint8_t(*jop | INST_SRC_REG | INST_CLS_JMP);
                ins.src_reg = p.parse_reg(toks[2]);
            } else {
                ins.opcode = uint8_t(*jop | INST_CLS_JMP);
                ins.imm = p.parse_imm32(toks[2]);
            }
            if (toks[3][0] == '+' || toks[3][0] == '-' || std::isdigit(uint8_t(toks[3][0]))) {
                ins.offset = int16_t(p.parse_int(toks[3]));
            } else {
                pending.push_back({out.size(), slot, toks[3], p.line_no});
            }
        } else if (m.starts_with("ldx")) {
            auto size = size_mnemonic_bits(m.substr(3));
            if (!size)
                p.fail("unknown mnemonic '" + m + "'");
            want(2);
            ins.opcode = uint8_t(INST_CLS_LDX | INST_MODE_MEM | *size);
            ins.dst_reg = p.parse_reg(toks[1]);
            auto [base, off] = p.parse_mem(toks[2]);
            ins.src_reg = base;
            ins.offset = off;
        } else if (m.starts_with("stx")) {
            auto size = size_mnemonic_bits(m.substr(3));
            if (!size)
                p.fail("unknown mnemonic '" + m + "'");
            want(2);
            ins.opcode = uint8_t(INST_CLS_STX | INST_MODE_MEM | *size);
            auto [base, off] = p.parse_mem(toks[1]);
            ins.dst_reg = base;
            ins.offset = off;
            ins.src_reg = p.parse_reg(toks[2]);
        } else if (m.starts_with("st")) {
            auto size = size_mnemonic_bits(m.substr(2));
            if (!size)
                p.fail("unknown mnemonic '" + m + "'");
            want(2);
            ins.opcode = uint8_t(INST_CLS_ST | INST_MODE_MEM | *size);
            auto [base, off] = p.parse_mem(toks[1]);
            ins.dst_reg = base;
            ins.offset = off;
            ins.imm = p.parse_imm32(toks[2]);
        } else if (auto alu = alu_mnemonic(m)) {
            if (alu->unary) {
                want(1);
                ins.opcode = uint8_t(alu->op | alu->cls);
                ins.dst_reg = p.parse_reg(toks[1]);
            } else {
                want(2);
                ins.dst_reg = p.parse_reg(toks[1]);
                if (toks[2][0] == 'r' && toks[2].size() >= 2 &&
                    std::isdigit(uint8_t(toks[2][1]))) {
                    ins.opcode = uint8_t(alu->op | INST_SRC_REG | alu->cls);
                    ins.src_reg = p.parse_reg(toks[2]);
                } else {
                    ins.opcode = uint8_t(alu->op | alu->cls);
                    ins.imm = p.parse_imm32(toks[2]);
                }
            }
        } else {
            p.fail("unknown mnemonic '" + m + "'");
        }

        out.push_back(ins);
        slot += ins.opcode == OP_LDDW ? 2 : 1;
    }

    for (const PendingJump& pj : pending) {
        auto it = labels.find(pj.label);
        if (it == labels.end())
            throw UndefinedLabel("line " + std::to_string(pj.line_no) + ": undefined label '" +
                                 pj.label + "'");
        const ptrdiff_t rel = ptrdiff_t(it->second) - ptrdiff_t(pj.slot) - 1;
        if (rel < INT16_MIN || rel > INT16_MAX)
            throw AsmSyntaxError(pj.line_no, "jump to '" + pj.label + "' out of 16-bit range");
        out[pj.instruction_index].offset = int16_t(rel);
    }
    return out;
}

} // namespace bpfsb
