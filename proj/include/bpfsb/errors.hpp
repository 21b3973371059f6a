#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace bpfsb {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// isa
struct TruncatedProgram : Error {
    using Error::Error;
};
struct UnknownOpcode : Error {
    using Error::Error;
};
struct RangeError : Error {
    using Error::Error;
};

// assembler
struct AsmSyntaxError : Error {
    AsmSyntaxError(int line, const std::string& msg)
        : Error("line " + std::to_string(line) + ": " + msg), line(line) {}
    int line;
};
struct UndefinedLabel : Error {
    using Error::Error;
};

// sandbox
struct BadAlignment : Error {
    using Error::Error;
};
struct BadSize : Error {
    using Error::Error;
};
struct AllocationFailure : Error {
    using Error::Error;
};
struct HeapExhausted : Error {
    using Error::Error;
};

// rewriter
struct OffsetOverflow : Error {
    using Error::Error;
};
struct AlreadyInstrumented : Error {
    using Error::Error;
};

// cfi / helpers
struct UnknownHelper : Error {
    using Error::Error;
};
struct ContextTooLarge : Error {
    using Error::Error;
};

// executor
struct TimerUnavailable : Error {
    using Error::Error;
};

enum class TrapReason : uint8_t {
    CfiViolation,
    BudgetExhausted,
    InvalidReservation,
    IllegalInstruction,
};

const char* trap_reason_name(TrapReason r);

// Thrown inside the interpreter / helpers; the executor converts it into a
// trap status. Never escapes the executor's public surface.
struct Trap {
    TrapReason reason;
    std::string detail;
};

} // namespace bpfsb
