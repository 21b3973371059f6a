#include "bpfsb/rewriter.hpp"

#include <sstream>

#include <json.hpp>

#include "bpfsb/loader.hpp"

namespace bpfsb {

namespace {

Instruction make(uint8_t opcode, uint8_t dst, uint8_t src, int16_t offset, int32_t imm) {
    return {opcode, dst, src, offset, imm, std::nullopt};
}

Instruction make_lddw(uint8_t dst, uint64_t value) {
    Instruction ins = make(OP_LDDW, dst, 0, 0, int32_t(uint32_t(value)));
    ins.wide_imm = int64_t(value);
    return ins;
}

} // namespace

InstrumentedProgram instrument(const Program& program, const AddressMasks& masks,
                               bool allow_back_edges) {
    const auto& insns = program.instructions;
    for (const Instruction& ins : insns)
        if (ins.dst_reg >= REG_SCRATCH_ADDR || ins.src_reg >= REG_SCRATCH_ADDR)
            throw AlreadyInstrumented("input already uses r11/r12: " + mnemonic(ins));

    const std::vector<size_t> in_slots = instruction_slots(insns);
    const size_t in_slot_count = slot_count(insns);

    // Output slot of each input instruction's first emitted slot, keyed by
    // input slot. Jumps land on the first slot of the emitted sequence so a
    // jump into a masked access executes the full check.
    std::vector<size_t> out_slot_of(in_slot_count + 1, 0);
    size_t out = 0;
    for (size_t i = 0; i < insns.size(); ++i) {
        out_slot_of[in_slots[i]] = out;
        switch (classify(insns[i])) {
        case InstructionClass::load:
        case InstructionClass::store: out += 9; break;
        case InstructionClass::load_imm64: out += 2; break;
        default: out += 1; break;
        }
    }
    out_slot_of[in_slot_count] = out;

    InstrumentedProgram result;
    result.program.type = program.type;
    result.program.name = program.name;
    result.masks = masks;

    auto& out_insns = result.program.instructions;
    auto emit = [&](const Instruction& ins, size_t origin_slot) {
        out_insns.push_back(ins);
        result.origin_map.push_back(origin_slot);
        if (ins.opcode == OP_LDDW)
            result.origin_map.push_back(origin_slot);
    };

    for (size_t i = 0; i < insns.size(); ++i) {
        const Instruction& ins = insns[i];
        const size_t slot = in_slots[i];
        const InstructionClass cls = classify(ins);

        if (cls == InstructionClass::load || cls == InstructionClass::store) {
            const uint8_t base = cls == InstructionClass::load ? ins.src_reg : ins.dst_reg;
            emit(make(OP_MOV64_REG, REG_SCRATCH_ADDR, base, 0, 0), slot);
            emit(make(OP_ADD64_IMM, REG_SCRATCH_ADDR, 0, 0, ins.offset), slot);
            emit(make_lddw(REG_SCRATCH_MASK, masks.and_mask), slot);
            emit(make(OP_AND64_REG, REG_SCRATCH_ADDR, REG_SCRATCH_MASK, 0, 0), slot);
            emit(make_lddw(REG_SCRATCH_MASK, masks.or_mask), slot);
            emit(make(OP_OR64_REG, REG_SCRATCH_ADDR, REG_SCRATCH_MASK, 0, 0), slot);
            Instruction access = ins;
            access.offset = 0;
            if (cls == InstructionClass::load)
                access.src_reg = REG_SCRATCH_ADDR;
            else
                access.dst_reg = REG_SCRATCH_ADDR;
            emit(access, slot);
            result.injected.mask_checks++;
        } else if (cls == InstructionClass::call) {
            Instruction guarded = ins;
            guarded.src_reg = REG_SCRATCH_MASK;
            emit(guarded, slot);
            result.injected.trampoline_checks++;
        } else if (cls == InstructionClass::jump) {
            // Offset recomputed below once all positions are known.
            emit(ins, slot);
        } else {
            emit(ins, slot);
        }
    }

    // Jump fixup: retarget every jump to the output slot corresponding to
    // its original target's origin.
    const std::vector<size_t> out_positions = instruction_slots(out_insns);
    for (size_t i = 0; i < out_insns.size(); ++i) {
        Instruction& ins = out_insns[i];
        if (classify(ins) != InstructionClass::jump)
            continue;
        const size_t own_in_slot = result.origin_map[out_positions[i]];
        const ptrdiff_t target_in = ptrdiff_t(own_in_slot) + 1 + ins.offset;
        const ptrdiff_t target_out = ptrdiff_t(out_slot_of[size_t(target_in)]);
        const ptrdiff_t rel = target_out - ptrdiff_t(out_positions[i]) - 1;
        if (rel < INT16_MIN || rel > INT16_MAX) {
            std::ostringstream oss;
            oss << "recomputed jump offset " << rel << " at output slot " << out_positions[i]
                << " exceeds signed 16 bits";
            throw OffsetOverflow(oss.str());
        }
        ins.offset = int16_t(rel);
    }

    result.injected.original_bytes = in_slot_count * 8;
    result.injected.instrumented_bytes = slot_count(out_insns) * 8;
    result.injected.growth_percent =
        result.injected.original_bytes == 0
            ? 0.0
            : 100.0 *
                  double(result.injected.instrumented_bytes - result.injected.original_bytes) /
                  double(result.injected.original_bytes);

    PrecheckLimits limits;
    limits.max_instructions = slot_count(out_insns);
    limits.allow_back_edges = allow_back_edges;
    limits.allow_reserved_regs = true;
    const CheckReport check = precheck(result.program, limits);
    if (!check.accepted)
        throw Error("instrumented output failed precheck: " + check.violations[0].detail);

    return result;
}

std::string size_report(const InjectedStats& injected) {
    std::ostringstream oss;
    oss << "original: " << injected.original_bytes << " bytes\n"
        << "instrumented: " << injected.instrumented_bytes << " bytes\n"
        << "growth: ";
    oss.precision(1);
    oss << std::fixed << injected.growth_percent << "%\n"
        << "mask checks: " << injected.mask_checks
        << "\ntrampoline checks: " << injected.trampoline_checks << "\n";
    return oss.str();
}

std::string stats_json(const InjectedStats& injected) {
    nlohmann::json j{{"mask_checks", injected.mask_checks},
                     {"trampoline_checks", injected.trampoline_checks},
                     {"original_bytes", injected.original_bytes},
                     {"instrumented_bytes", injected.instrumented_bytes},
                     {"growth_percent", injected.growth_percent}};
    return j.dump(2);
}

} // namespace bpfsb
