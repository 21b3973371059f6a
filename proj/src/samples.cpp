#include "bpfsb/samples.hpp"

#include <cstring>
#include <memory>
#include <sstream>

#include "bpfsb/assembler.hpp"
#include "bpfsb/executor.hpp"
#include "bpfsb/loader.hpp"

namespace bpfsb::samples {

SampleProgram xdp_packet_logger() {
    return {"xdp_packet_logger", ProgramType::xdp, R"(
; log the size of each ingress packet into map slot 0
ldxdw r6, [r1+0]   ; data
ldxdw r7, [r1+8]   ; data_end
mov64 r8, r7
sub64 r8, r6       ; packet length
mov64 r2, 0        ; key 0
call 1             ; map_lookup_elem
jeq r0, 0, pass
stxdw [r0+0], r8
pass:
mov64 r0, 2        ; XDP_PASS
exit
)"};
}

SampleProgram socket_filter_ringbuf() {
    return {"socket_filter_ringbuf", ProgramType::socket_filter, R"(
; push a {length, first word} record to user space via the ring buffer
ldxdw r6, [r1+0]   ; data
ldxdw r7, [r1+8]   ; data_end
mov64 r8, r7
sub64 r8, r6       ; packet length
mov64 r2, 16
call 131           ; ringbuf_reserve
jeq r0, 0, drop
stxdw [r0+0], r8
ldxdw r9, [r6+0]   ; first 8 packet bytes
stxdw [r0+8], r9
mov64 r1, r0
call 132           ; ringbuf_submit
drop:
mov64 r0, 0
exit
)"};
}

SampleProgram katran_style_balancer() {
    // A wide branchy body: the flow-hash dispatch at the top sends the
    // common case straight to a short tail, leaving the bulk of the
    // instrumented accesses unexecuted.
    constexpr int kBlocks = 30;
    constexpr int kStoresPerBlock = 8;
    std::ostringstream oss;
    oss << "ldxdw r6, [r1+0]   ; data\n"
           "ldxdw r7, [r1+8]   ; data_end\n"
           "ldxdw r2, [r6+0]   ; flow hash\n"
           "jeq r2, 0, fast\n";
    for (int b = 0; b < kBlocks; ++b) {
        oss << "; backend table probe " << b << "\n";
        for (int s = 0; s < kStoresPerBlock; ++s)
            oss << "stxdw [r10-" << 8 * (s + 1) << "], r2\n";
        oss << "add64 r2, " << b + 1 << "\n";
    }
    oss << "mov64 r0, 1\n"
           "exit\n"
           "fast:\n"
           "stxdw [r10-16], r2\n"
           "ldxdw r3, [r10-16]\n"
           "add64 r3, 1\n"
           "stxdw [r10-24], r3\n"
           "mov64 r0, 2\n"
           "exit\n";
    return {"katran_style_balancer", ProgramType::xdp, oss.str()};
}

const std::vector<SampleProgram>& bundled_samples() {
    static const std::vector<SampleProgram> samples = {
        xdp_packet_logger(), socket_filter_ringbuf(), katran_style_balancer()};
    return samples;
}

const SampleProgram* find_sample(const std::string& name) {
    for (const SampleProgram& s : bundled_samples())
        if (s.name == name)
            return &s;
    return nullptr;
}

ContextDescriptor packet_context_descriptor() {
    ContextDescriptor d;
    d.total_len = 16;
    d.fields = {
        {"data", 0, 8, false, FieldKind::region_address, 0},
        {"data_end", 8, 8, false, FieldKind::region_address, 0},
    };
    return d;
}

ContextDescriptor exploit_context_descriptor() {
    ContextDescriptor d;
    d.total_len = 16;
    d.fields = {
        {"ptr", 0, 8, false, FieldKind::scalar, 0},
        {"aux", 8, 8, false, FieldKind::scalar, 0},
    };
    return d;
}

namespace {

std::vector<uint8_t> scalar_context(uint64_t first, uint64_t second = 0) {
    std::vector<uint8_t> bytes(16, 0);
    std::memcpy(bytes.data(), &first, 8);
    std::memcpy(bytes.data() + 8, &second, 8);
    return bytes;
}

constexpr uint64_t kCanaryValue = 0xC0FFEE0DDEADBEEFull;

} // namespace

std::vector<ExploitCase> exploit_corpus() {
    std::vector<ExploitCase> cases;
    cases.push_back(
        {"oob-read-leaked-pointer",
         "arbitrary read through a pointer smuggled past bounds tracking",
         "ldxdw r2, [r1+0]\n"
         "ldxdw r0, [r2+0]\n"
         "exit\n",
         ExploitEffect::oob_read,
         [](const Sandbox&, uint64_t canary) { return scalar_context(canary); }});
    cases.push_back(
        {"oob-write-leaked-pointer",
         "arbitrary write through a pointer smuggled past bounds tracking",
         "ldxdw r2, [r1+0]\n"
         "lddw r3, 0x4141414141414141\n"
         "stxdw [r2+0], r3\n"
         "mov64 r0, 0\n"
         "exit\n",
         ExploitEffect::oob_write,
         [](const Sandbox&, uint64_t canary) { return scalar_context(canary); }});
    cases.push_back(
        {"oob-write-stack-delta",
         "write past the stack via attacker-controlled scalar arithmetic",
         "ldxdw r3, [r1+0]\n"
         "mov64 r2, r10\n"
         "add64 r2, r3\n"
         "lddw r4, 0x4242424242424242\n"
         "stxdw [r2+0], r4\n"
         "mov64 r0, 0\n"
         "exit\n",
         ExploitEffect::oob_write,
         [](const Sandbox& sb, uint64_t canary) {
             return scalar_context(canary - sb.stack_top());
         }});
    return cases;
}

ExploitReport run_exploit_suite(uint64_t sandbox_size) {
    ExploitReport report;
    const HelperRegistry registry = HelperRegistry::standard();
    const CapabilityTable table = CapabilityTable::build(default_policy(), registry);
    const ContextDescriptor descriptor = exploit_context_descriptor();

    for (const ExploitCase& c : exploit_corpus()) {
        ExploitCaseResult r;
        r.name = c.name;

        auto canary = std::make_unique<uint64_t>(kCanaryValue);
        const uint64_t canary_addr = reinterpret_cast<uint64_t>(canary.get());
        Sandbox sandbox(sandbox_size);

        Program program{parse_asm(c.asm_text), ProgramType::xdp, c.name};
        if (!precheck(program).accepted) {
            r.detail = "precheck rejected the case program";
            report.cases.push_back(r);
            report.all_raw_effects_shown = false;
            report.all_confined = false;
            continue;
        }

        std::vector<uint8_t> ctx = c.make_context(sandbox, canary_addr);
        ExecEnv env;
        env.registry = &registry;
        env.capabilities = &table;
        env.context = {&descriptor, &ctx, nullptr};

        // Raw run: the out-of-bounds effect must manifest.
        ExecOptions raw_opts;
        raw_opts.mode = ExecMode::raw;
        const ExecutionResult raw = execute(program, sandbox, env, raw_opts);
        if (c.effect == ExploitEffect::oob_read)
            r.raw_effect_shown =
                raw.status == ExecStatus::returned && raw.return_value == kCanaryValue;
        else
            r.raw_effect_shown = raw.status == ExecStatus::returned && *canary != kCanaryValue;
        *canary = kCanaryValue;

        // Sandboxed run: the same program must be fully confined.
        sandbox.reset();
        sandbox.metadata().detect_mode = true;
        const InstrumentedProgram instrumented = instrument(program, sandbox.masks());
        const ExecutionResult boxed = execute(instrumented, sandbox, env);

        bool confined = boxed.status == ExecStatus::returned && *canary == kCanaryValue &&
                        boxed.counters.mask_executed >= 1;
        if (c.effect == ExploitEffect::oob_read) {
            // The read must observe in-sandbox bytes at the masked address,
            // never the canary.
            uint64_t in_sandbox = 0;
            std::memcpy(&in_sandbox,
                        sandbox.at(mask_address(sandbox.masks(), canary_addr)), 8);
            confined = confined && boxed.return_value != kCanaryValue &&
                       boxed.return_value == in_sandbox;
        }
        r.confined = confined;

        std::ostringstream detail;
        detail << "raw " << (r.raw_effect_shown ? "effect shown" : "EFFECT MISSING")
               << "; sandboxed " << (r.confined ? "confined" : "ESCAPED") << " ("
               << sandbox.metadata().confinement_events.size() << " confinement event(s))";
        r.detail = detail.str();

        report.all_raw_effects_shown &= r.raw_effect_shown;
        report.all_confined &= r.confined;
        report.cases.push_back(std::move(r));
    }
    return report;
}

} // namespace bpfsb::samples
