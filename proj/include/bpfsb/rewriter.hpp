#pragma once

#include <string>
#include <vector>

#include "bpfsb/isa.hpp"
#include "bpfsb/sandbox.hpp"

namespace bpfsb {

struct InjectedStats {
    uint64_t mask_checks = 0;
    uint64_t trampoline_checks = 0;
    uint64_t original_bytes = 0;
    uint64_t instrumented_bytes = 0;
    double growth_percent = 0.0;
};

struct InstrumentedProgram {
    Program program;
    // For each output slot, the input slot it derives from (order-preserving).
    std::vector<size_t> origin_map;
    InjectedStats injected;
    AddressMasks masks;
};

// Expands every load/store into the masking sequence
//   mov64 r11, rb; add64 r11, off; lddw r12, and_mask; and64 r11, r12;
//   lddw r12, or_mask; or64 r11, r12; <access via [r11+0]>
// (net +8 slots per access), rewrites every call in place to the guarded
// form, and recomputes all jump offsets. The input must have passed
// precheck.
InstrumentedProgram instrument(const Program& program, const AddressMasks& masks,
                               bool allow_back_edges = false);

// A call routed through the trusted trampoline carries the scratch-register
// marker in its src field.
inline bool is_guarded_call(const Instruction& ins) {
    return ins.opcode == OP_CALL && ins.src_reg == REG_SCRATCH_MASK;
}

std::string size_report(const InjectedStats& injected);
std::string stats_json(const InjectedStats& injected);

} // namespace bpfsb
