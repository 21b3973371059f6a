#include <doctest.h>

#include <cstring>

#include "bpfsb/assembler.hpp"
#include "bpfsb/executor.hpp"
#include "bpfsb/loader.hpp"
#include "generators.hpp"

using namespace bpfsb;

namespace {

Program prog(const std::string& text, ProgramType type = ProgramType::xdp) {
    return {parse_asm(text), type, "test"};
}

struct Fixture {
    HelperRegistry registry = HelperRegistry::standard();
    CapabilityTable table = CapabilityTable::build(default_policy(), registry);
    ExecEnv env;
    Fixture() {
        env.capabilities = &table;
        env.registry = &registry;
    }
};

} // namespace

TEST_CASE("trivial program returns its value") {
    Sandbox sb(4096);
    ExecEnv env;
    const auto r = execute(prog("mov64 r0, 42\nexit\n"), sb, env);
    CHECK(r.status == ExecStatus::returned);
    CHECK(r.return_value == 42);
    CHECK(r.counters.instructions_retired == 2);
    CHECK(r.counters.mask_executed == 0);
    CHECK(r.counters.trampoline_executed == 0);
}

TEST_CASE("alu semantics") {
    Sandbox sb(4096);
    ExecEnv env;
    auto run = [&](const std::string& text) {
        const auto r = execute(prog(text), sb, env);
        REQUIRE(r.status == ExecStatus::returned);
        return r.return_value;
    };
    CHECK(run("mov64 r0, 10\ndiv64 r0, 0\nexit\n") == 0);   // div by zero yields 0
    CHECK(run("mov64 r0, 10\nmod64 r0, 0\nexit\n") == 10);  // mod by zero keeps dst
    CHECK(run("mov64 r0, 1\nlsh64 r0, 66\nexit\n") == 4);   // shift amount masked
    CHECK(run("mov64 r0, -1\nrsh32 r0, 28\nexit\n") == 15); // 32-bit ops zero-extend
    CHECK(run("mov64 r0, -8\narsh64 r0, 1\nexit\n") == uint64_t(int64_t(-4)));
    CHECK(run("mov64 r0, -1\nadd32 r0, 1\nexit\n") == 0);
}

TEST_CASE("budget exhaustion traps with retired exactly at the limit") {
    Sandbox sb(4096);
    ExecEnv env;
    const Program loop = prog("loop: add64 r1, 1\nja loop\n");
    for (uint64_t budget : {uint64_t(10), uint64_t(1000)}) {
        ExecOptions opts;
        opts.budget = budget;
        const auto r = execute(loop, sb, env, opts);
        REQUIRE(r.status == ExecStatus::trap);
        CHECK(r.trap_reason == TrapReason::BudgetExhausted);
        CHECK(r.counters.instructions_retired == budget);
    }
    // A terminating program under a generous budget is unaffected.
    ExecOptions opts;
    opts.budget = 100;
    const auto ok = execute(prog("mov64 r0, 1\nexit\n"), sb, env, opts);
    CHECK(ok.status == ExecStatus::returned);
}

TEST_CASE("instrumented run accounts every check") {
    Fixture f;
    Sandbox sb(4096);
    const Program p = prog("stxdw [r10-8], r2\n"
                           "ldxdw r3, [r10-8]\n"
                           "call 1\n"
                           "mov64 r0, 0\nexit\n");
    const auto ip = instrument(p, sb.masks());
    const auto r = execute(ip, sb, f.env);
    REQUIRE(r.status == ExecStatus::returned);
    CHECK(r.counters.mask_executed == ip.injected.mask_checks);
    CHECK(r.counters.trampoline_executed == ip.injected.trampoline_checks);
}

TEST_CASE("raw and sandboxed runs agree on random programs") {
    testgen::Rng rng(41);
    Fixture f;
    f.env.map = nullptr;
    for (int iter = 0; iter < 200; ++iter) {
        Program p{testgen::random_inbounds_program(rng, true), ProgramType::socket_filter,
                  "diff"};
        REQUIRE(precheck(p).accepted);

        Sandbox raw_sb(4096);
        ExecOptions raw_opts;
        raw_opts.mode = ExecMode::raw;
        const auto raw = execute(p, raw_sb, f.env, raw_opts);
        REQUIRE(raw.status == ExecStatus::returned);

        Sandbox sb(4096);
        const auto inst = instrument(p, sb.masks());
        const auto guarded = execute(inst, sb, f.env);
        REQUIRE(guarded.status == ExecStatus::returned);
        REQUIRE(guarded.return_value == raw.return_value);
    }
}

TEST_CASE("ring buffer is rolled back when a run traps") {
    Fixture f;
    Sandbox sb(4096);
    KernelRingBuffer rb(256);
    f.env.ringbuf = &rb;
    // Reserve + submit a record, then call a helper outside the xdp policy.
    const Program p = prog("mov64 r2, 8\n"
                           "call 131\n"
                           "mov64 r6, r0\n"
                           "mov64 r1, r6\n"
                           "call 132\n"
                           "call 35\n" // denied for xdp: CFI trap
                           "mov64 r0, 0\nexit\n");
    const auto ip = instrument(p, sb.masks());
    const auto r = execute(ip, sb, f.env);
    REQUIRE(r.status == ExecStatus::trap);
    CHECK(r.trap_reason == TrapReason::CfiViolation);
    // The committed record from before the trap is gone.
    CHECK(rb.records().empty());
    CHECK(rb.available() == 256);

    // The same program as socket_filter (where 35 is permitted) keeps it.
    Sandbox sb2(4096);
    Program p2 = p;
    p2.type = ProgramType::socket_filter;
    const auto ip2 = instrument(p2, sb2.masks());
    const auto ok = execute(ip2, sb2, f.env);
    REQUIRE(ok.status == ExecStatus::returned);
    CHECK(rb.records().size() == 1);
}

TEST_CASE("context flows through r1 and syncs on exit") {
    Fixture f;
    Sandbox sb(4096);
    ContextDescriptor d;
    d.total_len = 24;
    d.fields = {
        {"data", 0, 8, false, FieldKind::region_address, 0},
        {"data_end", 8, 8, false, FieldKind::region_address, 0},
        {"mark", 16, 4, true, FieldKind::scalar, 0},
    };
    std::vector<uint8_t> ctx(24, 0);
    std::vector<std::vector<uint8_t>> regions = {{0x5A, 2, 3, 4}};
    f.env.context = {&d, &ctx, &regions};

    // Bounds-check the packet the usual way, return its first byte, and
    // stamp the writable mark field.
    const Program p = prog("ldxdw r2, [r1+0]\n"
                           "ldxdw r3, [r1+8]\n"
                           "mov64 r4, r2\n"
                           "add64 r4, 1\n"
                           "jgt r4, r3, fail\n"
                           "ldxb r0, [r2+0]\n"
                           "stw [r1+16], 7\n"
                           "exit\n"
                           "fail: mov64 r0, 0\nexit\n");
    const auto ip = instrument(p, sb.masks());
    const auto r = execute(ip, sb, f.env);
    REQUIRE(r.status == ExecStatus::returned);
    CHECK(r.return_value == 0x5A);
    uint32_t mark;
    std::memcpy(&mark, ctx.data() + 16, 4);
    CHECK(mark == 7); // writable scalar written back

    // A trapping run performs no write-back.
    std::memcpy(ctx.data() + 16, "\0\0\0\0", 4);
    Sandbox sb2(4096);
    ExecOptions opts;
    opts.budget = 3;
    const auto trapped = execute(ip, sb2, f.env, opts);
    REQUIRE(trapped.status == ExecStatus::trap);
    std::memcpy(&mark, ctx.data() + 16, 4);
    CHECK(mark == 0);
}

TEST_CASE("detect mode records confinement events") {
    Fixture f;
    Sandbox sb(4096);
    sb.metadata().detect_mode = true;
    const uint64_t wild = 0x7FFF12345678ull;
    char text[128];
    std::snprintf(text, sizeof text, "lddw r1, %llu\nldxb r0, [r1+0]\nexit\n",
                  static_cast<unsigned long long>(wild));
    const auto ip = instrument(prog(text), sb.masks());
    const auto r = execute(ip, sb, f.env);
    REQUIRE(r.status == ExecStatus::returned);
    REQUIRE(sb.metadata().confinement_events.size() == 1);
    const ConfinementEvent& ev = sb.metadata().confinement_events[0];
    CHECK(ev.original_address == wild);
    CHECK(ev.masked_address == mask_address(sb.masks(), wild));
    CHECK(ev.instruction_index == 2); // the ldxb sits at input slot 2, after the lddw

    // In-bounds accesses produce no events.
    Sandbox sb2(4096);
    sb2.metadata().detect_mode = true;
    const auto ip2 = instrument(prog("stxdw [r10-8], r2\nmov64 r0, 0\nexit\n"), sb2.masks());
    REQUIRE(execute(ip2, sb2, f.env).status == ExecStatus::returned);
    CHECK(sb2.metadata().confinement_events.empty());
}

TEST_CASE("trace attributes output slots to original instructions") {
    Fixture f;
    Sandbox sb(4096);
    const auto ip = instrument(prog("stxdw [r10-8], r2\nmov64 r0, 0\nexit\n"), sb.masks());
    std::vector<TraceEntry> trace;
    ExecOptions opts;
    opts.trace = &trace;
    const auto r = execute(ip, sb, f.env, opts);
    REQUIRE(r.status == ExecStatus::returned);
    CHECK(trace.size() == r.counters.instructions_retired);
    // Every slot of the masking sequence points back at the store's slot 0.
    for (size_t i = 0; i < 7; ++i)
        CHECK(trace[i].origin_slot == 0);
    CHECK(trace[7].origin_slot == 1);
    CHECK(trace[8].origin_slot == 2);
}

TEST_CASE("account is linear in the executed counters") {
    const CostModel model{3.0, 10.0, 5.0};
    ExecutedCounters c;
    c.mask_executed = 37;
    c.trampoline_executed = 2;
    const OverheadBreakdown b = account(c, model);
    CHECK(b.c_mem == doctest::Approx(111.0));
    CHECK(b.c_tram == doctest::Approx(20.0));
    CHECK(b.c_manage == doctest::Approx(5.0));
    CHECK(b.c_overall == doctest::Approx(136.0));

    // Doubling the counters doubles the variable terms only.
    c.mask_executed *= 2;
    c.trampoline_executed *= 2;
    const OverheadBreakdown b2 = account(c, model);
    CHECK(b2.c_mem == doctest::Approx(2 * b.c_mem));
    CHECK(b2.c_tram == doctest::Approx(2 * b.c_tram));
    CHECK(b2.c_manage == doctest::Approx(b.c_manage));
}

TEST_CASE("calibration produces a usable model") {
    CHECK_THROWS_AS(calibrate(10), Error);
    const CostModel model = calibrate(2000);
    CHECK(model.unit_mask_cost >= 0.0);
    CHECK(model.unit_trampoline_cost >= 0.0);
    CHECK(model.manage_cost >= 1.0);
}
