#pragma once

#include <string>
#include <vector>

#include "bpfsb/isa.hpp"

namespace bpfsb {

enum class ViolationCode : uint8_t {
    TooLarge,
    BadJumpTarget,
    Unreachable,
    BackEdge,
    ReservedRegister,
    FallThrough,
};

const char* violation_code_name(ViolationCode c);

struct Violation {
    ViolationCode code;
    size_t instruction_index; // slot index
    std::string detail;
};

struct CheckReport {
    bool accepted = true;
    std::vector<Violation> violations;
};

struct PrecheckLimits {
    size_t max_instructions = 4096; // slots
    bool allow_back_edges = false;
    // Set by the rewriter when re-checking its own output; user programs
    // must never mention r11/r12.
    bool allow_reserved_regs = false;
};

// First-pass static checks: size limit, jump-target bounds, reachability by
// depth-first search from slot 0, optional back-edge rejection, reserved
// register use, and fall-through off the end.
CheckReport precheck(const Program& program, const PrecheckLimits& limits = {});

} // namespace bpfsb
