#include "bpfsb/loader.hpp"

#include <sstream>

namespace bpfsb {

const char* violation_code_name(ViolationCode c) {
    switch (c) {
    case ViolationCode::TooLarge: return "TooLarge";
    case ViolationCode::BadJumpTarget: return "BadJumpTarget";
    case ViolationCode::Unreachable: return "Unreachable";
    case ViolationCode::BackEdge: return "BackEdge";
    case ViolationCode::ReservedRegister: return "ReservedRegister";
    case ViolationCode::FallThrough: return "FallThrough";
    }
    return "?";
}

CheckReport precheck(const Program& program, const PrecheckLimits& limits) {
    CheckReport report;
    auto flag = [&](ViolationCode code, size_t slot, std::string detail) {
        report.violations.push_back({code, slot, std::move(detail)});
    };

    const auto& insns = program.instructions;
    const std::vector<size_t> slots = instruction_slots(insns);
    const std::vector<ptrdiff_t> at_slot = slot_to_instruction(insns);
    const size_t n_slots = at_slot.size();

    if (n_slots > limits.max_instructions)
        flag(ViolationCode::TooLarge, 0,
             std::to_string(n_slots) + " instructions exceed the limit of " +
                 std::to_string(limits.max_instructions));

    if (!limits.allow_reserved_regs) {
        for (size_t i = 0; i < insns.size(); ++i) {
            if (insns[i].dst_reg >= REG_SCRATCH_ADDR || insns[i].src_reg >= REG_SCRATCH_ADDR)
                flag(ViolationCode::ReservedRegister, slots[i],
                     "r11/r12 are reserved for instrumentation: " + mnemonic(insns[i]));
        }
    }

    if (insns.empty()) {
        flag(ViolationCode::FallThrough, 0, "empty program");
        report.accepted = report.violations.empty();
        return report;
    }

    // Resolved jump target of a conditional or unconditional jump, in slots.
    auto jump_target = [&](size_t i) -> ptrdiff_t {
        return ptrdiff_t(slots[i]) + 1 + insns[i].offset;
    };
    auto target_valid = [&](ptrdiff_t t) {
        return t >= 0 && size_t(t) < n_slots && at_slot[size_t(t)] >= 0;
    };

    // Depth-first search from slot 0.
    std::vector<bool> visited(insns.size(), false);
    std::vector<size_t> stack = {0};
    visited[0] = true;
    while (!stack.empty()) {
        const size_t i = stack.back();
        stack.pop_back();
        const Instruction& ins = insns[i];
        const InstructionClass cls = classify(ins);

        std::vector<size_t> succ;
        const bool is_ja = ins.opcode == OP_JA;
        if (cls == InstructionClass::jump) {
            const ptrdiff_t t = jump_target(i);
            if (!target_valid(t)) {
                std::ostringstream oss;
                oss << "jump target slot " << t
                    << (t >= 0 && size_t(t) < n_slots ? " lands inside a wide load"
                                                      : " is out of bounds");
                flag(ViolationCode::BadJumpTarget, slots[i], oss.str());
            } else {
                if (!limits.allow_back_edges && size_t(t) <= slots[i])
                    flag(ViolationCode::BackEdge, slots[i],
                         "jump back to slot " + std::to_string(t));
                succ.push_back(size_t(at_slot[size_t(t)]));
            }
        }
        if (cls != InstructionClass::exit && !is_ja) {
            const size_t next = slots[i] + (ins.opcode == OP_LDDW ? 2 : 1);
            if (next >= n_slots)
                flag(ViolationCode::FallThrough, slots[i],
                     "control falls through past the end after: " + mnemonic(ins));
            else
                succ.push_back(size_t(at_slot[next]));
        }
        for (size_t s : succ) {
            if (!visited[s]) {
                visited[s] = true;
                stack.push_back(s);
            }
        }
    }

    for (size_t i = 0; i < insns.size(); ++i)
        if (!visited[i])
            flag(ViolationCode::Unreachable, slots[i],
                 "not reachable from slot 0: " + mnemonic(insns[i]));

    report.accepted = report.violations.empty();
    return report;
}

} // namespace bpfsb
