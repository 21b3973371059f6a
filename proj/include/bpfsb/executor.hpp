#pragma once

#include <string>
#include <vector>

#include "bpfsb/cfi.hpp"
#include "bpfsb/helpers.hpp"
#include "bpfsb/isa.hpp"
#include "bpfsb/rewriter.hpp"
#include "bpfsb/sandbox.hpp"

namespace bpfsb {

struct OverheadBreakdown {
    double c_mem = 0;
    double c_tram = 0;
    double c_manage = 0;
    double c_overall = 0;
};

// Linear per-event cost model in calibrated nanoseconds.
struct CostModel {
    double unit_mask_cost = 0;
    double unit_trampoline_cost = 0;
    double manage_cost = 0;
};

enum class ExecStatus : uint8_t { returned, trap };

struct ExecutionResult {
    ExecStatus status = ExecStatus::returned;
    uint64_t return_value = 0;
    TrapReason trap_reason = TrapReason::IllegalInstruction;
    std::string trap_detail;
    ExecutedCounters counters;
    OverheadBreakdown breakdown;
};

enum class ExecMode : uint8_t { sandboxed, raw };

// Context handed to the program at invocation. bytes/regions are written
// back through sync_context on a clean exit.
struct ContextInput {
    const ContextDescriptor* descriptor = nullptr;
    std::vector<uint8_t>* bytes = nullptr;
    std::vector<std::vector<uint8_t>>* regions = nullptr;
};

struct ExecEnv {
    const CapabilityTable* capabilities = nullptr;
    const HelperRegistry* registry = nullptr;
    KernelRingBuffer* ringbuf = nullptr;
    ArrayMap* map = nullptr;
    ContextInput context;
};

struct TraceEntry {
    size_t slot;
    size_t origin_slot;
    std::string text;
};

struct ExecOptions {
    uint64_t budget = 1'000'000;
    ExecMode mode = ExecMode::sandboxed;
    CostModel cost_model; // folded into the result's breakdown
    // Output-slot -> original-slot map of an instrumented program; used for
    // trace attribution only.
    const std::vector<size_t>* origin_map = nullptr;
    std::vector<TraceEntry>* trace = nullptr;
};

// Interprets the program inside the sandbox. Registers start as r1 =
// mirrored context base, r10 = stack top, all others zero. Raw mode skips
// masking enforcement and CFI and exists only for differential testing and
// the exploit suite.
ExecutionResult execute(const Program& program, Sandbox& sandbox, ExecEnv& env,
                        const ExecOptions& options = {});

// Sandboxed-mode convenience wrapper.
ExecutionResult execute(const InstrumentedProgram& program, Sandbox& sandbox, ExecEnv& env,
                        ExecOptions options = {});

OverheadBreakdown account(const ExecutedCounters& counters, const CostModel& model);

// Measures the per-event costs with micro-loops; returns nanoseconds.
CostModel calibrate(uint64_t iterations);

} // namespace bpfsb
