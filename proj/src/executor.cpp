#include "bpfsb/executor.hpp"

#include <array>
#include <chrono>
#include <cstring>

#include "bpfsb/assembler.hpp"

namespace bpfsb {

namespace {

uint64_t alu_eval(uint8_t op, bool is64, uint64_t dst, uint64_t src) {
    const uint64_t width_mask = is64 ? ~uint64_t(0) : uint64_t(UINT32_MAX);
    const int shift_mask = is64 ? 63 : 31;
    dst &= width_mask;
    src &= width_mask;
    uint64_t r;
    switch (op) {
    case ALU_OP_ADD: r = dst + src; break;
    case ALU_OP_SUB: r = dst - src; break;
    case ALU_OP_MUL: r = dst * src; break;
    case ALU_OP_DIV: r = src == 0 ? 0 : dst / src; break;
    case ALU_OP_OR: r = dst | src; break;
    case ALU_OP_AND: r = dst & src; break;
    case ALU_OP_LSH: r = dst << (src & shift_mask); break;
    case ALU_OP_RSH: r = dst >> (src & shift_mask); break;
    case ALU_OP_NEG: r = uint64_t(0) - dst; break;
    case ALU_OP_MOD: r = src == 0 ? dst : dst % src; break;
    case ALU_OP_XOR: r = dst ^ src; break;
    case ALU_OP_MOV: r = src; break;
    case ALU_OP_ARSH:
        if (is64)
            r = uint64_t(int64_t(dst) >> (src & 63));
        else
            r = uint64_t(uint32_t(int32_t(uint32_t(dst)) >> (src & 31)));
        break;
    default: throw Trap{TrapReason::IllegalInstruction, "bad alu op"};
    }
    return r & width_mask;
}

bool jump_taken(uint8_t op, uint64_t dst, uint64_t src) {
    switch (op) {
    case JMP_OP_JEQ: return dst == src;
    case JMP_OP_JGT: return dst > src;
    case JMP_OP_JGE: return dst >= src;
    case JMP_OP_JSET: return (dst & src) != 0;
    case JMP_OP_JNE: return dst != src;
    case JMP_OP_JSGT: return int64_t(dst) > int64_t(src);
    case JMP_OP_JSGE: return int64_t(dst) >= int64_t(src);
    case JMP_OP_JLT: return dst < src;
    case JMP_OP_JLE: return dst <= src;
    case JMP_OP_JSLT: return int64_t(dst) < int64_t(src);
    case JMP_OP_JSLE: return int64_t(dst) <= int64_t(src);
    }
    throw Trap{TrapReason::IllegalInstruction, "bad jump op"};
}

struct Machine {
    const Program& program;
    Sandbox& sandbox;
    ExecEnv& env;
    const ExecOptions& options;

    std::array<uint64_t, 13> regs{};
    std::vector<size_t> slots;
    std::vector<ptrdiff_t> at_slot;
    size_t n_slots = 0;

    // Pre-masking value of r11, captured at the and64 step of a masking
    // sequence so detect mode can report the original address.
    uint64_t pre_mask_addr = 0;
    bool pre_mask_valid = false;

    uint64_t load_mem(uint64_t addr, int width) {
        uint64_t v = 0;
        std::memcpy(&v, mem_ptr(addr, width), size_t(width));
        return v;
    }

    void store_mem(uint64_t addr, int width, uint64_t v) {
        std::memcpy(mem_ptr(addr, width), &v, size_t(width));
    }

    uint8_t* mem_ptr(uint64_t addr, int width) {
        if (options.mode == ExecMode::sandboxed) {
            // Instrumented code has already masked the address; the red
            // zone absorbs widths up to 8 at the top of the region.
            if (!sandbox.contains(addr))
                throw Trap{TrapReason::IllegalInstruction,
                           "sandboxed access outside the data region"};
            return sandbox.at(addr);
        }
        (void)width;
        return reinterpret_cast<uint8_t*>(addr);
    }

    uint64_t run() {
        const auto& insns = program.instructions;
        slots = instruction_slots(insns);
        at_slot = slot_to_instruction(insns);
        n_slots = at_slot.size();
        ExecutedCounters& counters = sandbox.metadata().counters;

        size_t pc = 0;
        while (true) {
            if (pc >= insns.size())
                throw Trap{TrapReason::IllegalInstruction, "control ran past the end"};
            if (counters.instructions_retired >= options.budget)
                throw Trap{TrapReason::BudgetExhausted,
                           "instruction budget of " + std::to_string(options.budget) +
                               " exhausted"};
            const Instruction& ins = insns[pc];
            counters.instructions_retired++;
            if (options.trace) {
                const size_t slot = slots[pc];
                const size_t origin =
                    options.origin_map && slot < options.origin_map->size()
                        ? (*options.origin_map)[slot]
                        : slot;
                options.trace->push_back({slot, origin, mnemonic(ins)});
            }

            size_t next = pc + 1;
            switch (classify(ins)) {
            case InstructionClass::alu: {
                const bool is64 = (ins.opcode & INST_CLS_MASK) == INST_CLS_ALU64;
                const uint8_t op = ins.opcode & INST_ALU_OP_MASK;
                uint64_t src = ins.opcode & INST_SRC_REG ? regs[ins.src_reg]
                                                         : uint64_t(int64_t(ins.imm));
                if (op == ALU_OP_AND && ins.dst_reg == REG_SCRATCH_ADDR &&
                    (ins.opcode & INST_SRC_REG) && ins.src_reg == REG_SCRATCH_MASK) {
                    pre_mask_addr = regs[REG_SCRATCH_ADDR];
                    pre_mask_valid = true;
                }
                regs[ins.dst_reg] = alu_eval(op, is64, regs[ins.dst_reg], src);
                // A completed and/or pair counts as one executed mask check.
                if (op == ALU_OP_OR && ins.dst_reg == REG_SCRATCH_ADDR &&
                    (ins.opcode & INST_SRC_REG) && ins.src_reg == REG_SCRATCH_MASK &&
                    pre_mask_valid) {
                    counters.mask_executed++;
                    if (sandbox.metadata().detect_mode &&
                        regs[REG_SCRATCH_ADDR] != pre_mask_addr) {
                        const size_t slot = slots[pc];
                        const size_t origin =
                            options.origin_map && slot < options.origin_map->size()
                                ? (*options.origin_map)[slot]
                                : slot;
                        sandbox.metadata().confinement_events.push_back(
                            {origin, pre_mask_addr, regs[REG_SCRATCH_ADDR]});
                    }
                    pre_mask_valid = false;
                }
                break;
            }
            case InstructionClass::load_imm64:
                regs[ins.dst_reg] = uint64_t(*ins.wide_imm);
                break;
            case InstructionClass::load: {
                const uint64_t addr = regs[ins.src_reg] + uint64_t(int64_t(ins.offset));
                regs[ins.dst_reg] = load_mem(addr, access_width(ins.opcode));
                break;
            }
            case InstructionClass::store: {
                const uint64_t addr = regs[ins.dst_reg] + uint64_t(int64_t(ins.offset));
                const uint64_t v = (ins.opcode & INST_CLS_MASK) == INST_CLS_STX
                                       ? regs[ins.src_reg]
                                       : uint64_t(int64_t(ins.imm));
                store_mem(addr, access_width(ins.opcode), v);
                break;
            }
            case InstructionClass::jump: {
                bool taken = true;
                if (ins.opcode != OP_JA) {
                    const uint64_t src = ins.opcode & INST_SRC_REG
                                             ? regs[ins.src_reg]
                                             : uint64_t(int64_t(ins.imm));
                    taken = jump_taken(ins.opcode & INST_ALU_OP_MASK, regs[ins.dst_reg], src);
                }
                if (taken) {
                    const ptrdiff_t target = ptrdiff_t(slots[pc]) + 1 + ins.offset;
                    if (target < 0 || size_t(target) >= n_slots || at_slot[size_t(target)] < 0)
                        throw Trap{TrapReason::IllegalInstruction, "jump out of bounds"};
                    next = size_t(at_slot[size_t(target)]);
                }
                break;
            }
            case InstructionClass::call: {
                HelperArgs args{regs[1], regs[2], regs[3], regs[4], regs[5]};
                HelperEnv henv{sandbox, env.ringbuf, env.map};
                if (options.mode == ExecMode::sandboxed) {
                    if (!env.capabilities || !env.registry)
                        throw Trap{TrapReason::CfiViolation,
                                   "no capability table bound to this execution"};
                    regs[0] = dispatch(*env.capabilities, program.type, ins.imm, args,
                                       *env.registry, henv);
                } else {
                    const HelperInfo* info =
                        env.registry ? env.registry->find(ins.imm) : nullptr;
                    if (!info)
                        throw Trap{TrapReason::IllegalInstruction,
                                   "call to unregistered helper " + std::to_string(ins.imm)};
                    regs[0] = info->fn(henv, args);
                }
                break;
            }
            case InstructionClass::exit: return regs[0];
            }
            pc = next;
        }
    }
};

} // namespace

ExecutionResult execute(const Program& program, Sandbox& sandbox, ExecEnv& env,
                        const ExecOptions& options) {
    ExecutionResult result;
    sandbox.metadata().counters = {};
    sandbox.metadata().confinement_events.clear();

    // External objects must be untouched if the run traps.
    std::optional<KernelRingBuffer> ringbuf_snapshot;
    if (env.ringbuf)
        ringbuf_snapshot = *env.ringbuf;

    Machine machine{program, sandbox, env, options, {}, {}, {}, 0, 0, false};
    try {
        if (env.context.descriptor && env.context.bytes) {
            machine.regs[REG_CTX] = mirror_context(
                sandbox, *env.context.descriptor, *env.context.bytes,
                env.context.regions ? *env.context.regions
                                    : std::vector<std::vector<uint8_t>>{});
        }
        machine.regs[REG_FP] = sandbox.stack_top();
        result.return_value = machine.run();
        result.status = ExecStatus::returned;
        if (env.context.descriptor && env.context.bytes) {
            std::vector<std::vector<uint8_t>> no_regions;
            sync_context(sandbox, *env.context.descriptor, *env.context.bytes,
                         env.context.regions ? *env.context.regions : no_regions);
        }
        if (env.map)
            map_sync(sandbox, *env.map);
    } catch (const Trap& trap) {
        result.status = ExecStatus::trap;
        result.trap_reason = trap.reason;
        result.trap_detail = trap.detail;
        if (env.ringbuf && ringbuf_snapshot)
            *env.ringbuf = *ringbuf_snapshot;
    }
    result.counters = sandbox.metadata().counters;
    result.breakdown = account(result.counters, options.cost_model);
    return result;
}

ExecutionResult execute(const InstrumentedProgram& program, Sandbox& sandbox, ExecEnv& env,
                        ExecOptions options) {
    options.mode = ExecMode::sandboxed;
    options.origin_map = &program.origin_map;
    return execute(program.program, sandbox, env, options);
}

OverheadBreakdown account(const ExecutedCounters& counters, const CostModel& model) {
    OverheadBreakdown b;
    b.c_mem = double(counters.mask_executed) * model.unit_mask_cost;
    b.c_tram = double(counters.trampoline_executed) * model.unit_trampoline_cost;
    b.c_manage = model.manage_cost;
    b.c_overall = b.c_mem + b.c_tram + b.c_manage;
    return b;
}

namespace {

double time_ns(uint64_t iterations, const std::function<void()>& body) {
    using clock = std::chrono::steady_clock;
    const auto t0 = clock::now();
    for (uint64_t i = 0; i < iterations; ++i)
        body();
    const auto t1 = clock::now();
    return double(std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count()) /
           double(iterations);
}

} // namespace

CostModel calibrate(uint64_t iterations) {
    if (iterations < 1000)
        throw Error("calibrate requires at least 1000 iterations");
    using clock = std::chrono::steady_clock;
    if (clock::period::den < 1'000'000)
        throw TimerUnavailable("steady clock is too coarse for nanosecond calibration");

    constexpr int kStores = 16;
    std::string src;
    for (int i = 0; i < kStores; ++i)
        src += "stxdw [r10-8], r0\n";
    src += "mov64 r0, 0\nexit\n";
    Program raw_prog{parse_asm(src), ProgramType::socket_filter, "calibrate"};
    Sandbox sandbox(4096);
    const InstrumentedProgram instrumented = instrument(raw_prog, sandbox.masks());

    const HelperRegistry registry = HelperRegistry::standard();
    const CapabilityTable table = CapabilityTable::build(default_policy(), registry);
    ExecEnv env;
    env.capabilities = &table;
    env.registry = &registry;

    const uint64_t execs = std::max<uint64_t>(iterations / kStores, 1000 / kStores + 1);
    const double t_instrumented = time_ns(execs, [&] {
        ExecOptions opts;
        execute(instrumented, sandbox, env, opts);
    });
    const double t_raw = time_ns(execs, [&] {
        ExecOptions opts;
        opts.mode = ExecMode::raw;
        execute(raw_prog, sandbox, env, opts);
    });

    HelperEnv henv{sandbox, nullptr, nullptr};
    const HelperArgs args{};
    const double t_tram = time_ns(iterations, [&] {
        dispatch(table, ProgramType::socket_filter, HELPER_GET_CURRENT_TASK, args, registry,
                 henv);
    });

    const uint64_t manage_iters = std::max<uint64_t>(iterations / 16, 64);
    const double t_manage = time_ns(manage_iters, [&] { Sandbox s(4096); });

    CostModel model;
    model.unit_mask_cost = std::max(0.0, (t_instrumented - t_raw) / double(kStores));
    model.unit_trampoline_cost = std::max(0.0, t_tram);
    model.manage_cost = std::max(1.0, t_manage);
    return model;
}

} // namespace bpfsb
