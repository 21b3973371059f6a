// Command-line front end: assemble, precheck, instrument, and execute
// programs inside the masking sandbox.
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "bpfsb/assembler.hpp"
#include "bpfsb/executor.hpp"
#include "bpfsb/loader.hpp"
#include "bpfsb/report.hpp"
#include "bpfsb/samples.hpp"

using namespace bpfsb;

namespace {

// Exit codes: 0 ok, 1 parse error, 2 precheck rejection, 3 trap, 4 escape.
constexpr int kExitOk = 0;
constexpr int kExitParse = 1;
constexpr int kExitPrecheck = 2;
constexpr int kExitTrap = 3;
constexpr int kExitEscape = 4;

struct Options {
    uint64_t size = 4096;
    uint64_t budget = 1'000'000;
    std::string policy_path;
    std::string ctx_path;
    std::string payload_path;
    std::string type_name = "xdp";
    bool json = false;
    bool detect = false;
    bool unsafe_raw = false;
    bool allow_loops = false;
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error("cannot open '" + path + "'");
    std::ostringstream oss;
    oss << in.rdbuf();
    return oss.str();
}

void write_file(const std::string& path, const std::vector<uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error("cannot write '" + path + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
}

ProgramType parse_type(const std::string& name) {
    if (name == "xdp")
        return ProgramType::xdp;
    if (name == "socket_filter")
        return ProgramType::socket_filter;
    throw Error("unknown program type '" + name + "' (expected xdp or socket_filter)");
}

bool looks_like_asm(const std::string& path) {
    return path.ends_with(".s") || path.ends_with(".asm") || path.ends_with(".txt");
}

// A program argument is either a bundled sample name, an assembly file, or
// an encoded bytecode file.
Program load_program(const std::string& spec, ProgramType type) {
    if (const samples::SampleProgram* sample = samples::find_sample(spec))
        return {parse_asm(sample->asm_text), sample->type, sample->name};
    const std::string data = read_file(spec);
    if (looks_like_asm(spec))
        return {parse_asm(data), type, spec};
    const std::vector<uint8_t> bytes(data.begin(), data.end());
    return {decode(bytes), type, spec};
}

PrecheckLimits limits_for(const Options& opt) {
    PrecheckLimits limits;
    limits.allow_back_edges = opt.allow_loops;
    return limits;
}

void print_violations(const CheckReport& report) {
    for (const auto& v : report.violations)
        std::cerr << "precheck: slot " << v.instruction_index << ": " << v.detail << "\n";
}

CapabilityPolicy load_policy(const Options& opt) {
    if (opt.policy_path.empty())
        return default_policy();
    return policy_from_json_text(read_file(opt.policy_path));
}

struct ContextBundle {
    std::optional<ContextDescriptor> descriptor;
    std::vector<uint8_t> bytes;
    std::vector<std::vector<uint8_t>> regions;
};

// --ctx gives the descriptor; --payload fills the first auxiliary region
// (remaining regions default to 64 zero bytes each).
ContextBundle load_context(const Options& opt) {
    ContextBundle bundle;
    if (opt.ctx_path.empty())
        return bundle;
    bundle.descriptor = ContextDescriptor::from_json_text(read_file(opt.ctx_path));
    bundle.bytes.assign(bundle.descriptor->total_len, 0);
    size_t region_fields = 0;
    for (const ContextField& f : bundle.descriptor->fields)
        if (f.kind == FieldKind::region_address && !f.name.ends_with("_end"))
            ++region_fields;
    for (size_t i = 0; i < region_fields; ++i)
        bundle.regions.emplace_back(64, 0);
    if (!opt.payload_path.empty()) {
        const std::string payload = read_file(opt.payload_path);
        if (bundle.regions.empty())
            throw Error("--payload given but the context descriptor has no regions");
        bundle.regions[0].assign(payload.begin(), payload.end());
    }
    return bundle;
}

int cmd_asm(const std::string& source, const std::string& output) {
    const std::vector<Instruction> insns = parse_asm(read_file(source));
    write_file(output, encode(insns));
    std::cout << slot_count(insns) << " slots\n";
    return kExitOk;
}

int cmd_precheck(const Options& opt, const std::string& program) {
    const Program p = load_program(program, parse_type(opt.type_name));
    const CheckReport report = precheck(p, limits_for(opt));
    if (!report.accepted) {
        print_violations(report);
        return kExitPrecheck;
    }
    std::cout << "accepted (" << slot_count(p.instructions) << " slots)\n";
    return kExitOk;
}

int cmd_instrument(const Options& opt, const std::string& program,
                   const std::string& output) {
    const Program p = load_program(program, parse_type(opt.type_name));
    const CheckReport report = precheck(p, limits_for(opt));
    if (!report.accepted) {
        print_violations(report);
        return kExitPrecheck;
    }
    Sandbox sandbox(opt.size);
    const InstrumentedProgram out = instrument(p, sandbox.masks(), opt.allow_loops);
    if (!output.empty())
        write_file(output, encode(out.program.instructions));
    std::cout << (opt.json ? stats_json(out.injected) : size_report(out.injected)) << "\n";
    return kExitOk;
}

int cmd_run(const Options& opt, const std::string& program) {
    Program p = load_program(program, parse_type(opt.type_name));
    const CheckReport report = precheck(p, limits_for(opt));
    if (!report.accepted) {
        print_violations(report);
        return kExitPrecheck;
    }

    Sandbox sandbox(opt.size);
    sandbox.metadata().detect_mode = opt.detect;

    const HelperRegistry registry = HelperRegistry::standard();
    const CapabilityTable table = CapabilityTable::build(load_policy(opt), registry);
    KernelRingBuffer ringbuf(1 << 16);
    ArrayMap map(8, 64);
    ContextBundle ctx = load_context(opt);

    ExecEnv env;
    env.registry = &registry;
    env.capabilities = &table;
    env.ringbuf = &ringbuf;
    env.map = &map;
    if (ctx.descriptor)
        env.context = {&*ctx.descriptor, &ctx.bytes, &ctx.regions};

    ExecOptions exec_opts;
    exec_opts.budget = opt.budget;

    ExecutionResult result;
    if (opt.unsafe_raw) {
        exec_opts.mode = ExecMode::raw;
        result = execute(p, sandbox, env, exec_opts);
    } else {
        const InstrumentedProgram inst = instrument(p, sandbox.masks(), opt.allow_loops);
        result = execute(inst, sandbox, env, exec_opts);
    }

    const auto& events = sandbox.metadata().confinement_events;
    std::cout << (opt.json ? run_report_json(result, events)
                           : run_report_text(result, events));
    if (opt.json)
        std::cout << "\n";
    return result.status == ExecStatus::returned ? kExitOk : kExitTrap;
}

int cmd_bench(const Options& opt, const std::string& program, uint64_t iterations) {
    if (iterations < 1)
        throw Error("bench requires at least one iteration");
    Program p = load_program(program, parse_type(opt.type_name));
    const CheckReport report = precheck(p, limits_for(opt));
    if (!report.accepted) {
        print_violations(report);
        return kExitPrecheck;
    }

    const HelperRegistry registry = HelperRegistry::standard();
    const CapabilityTable table = CapabilityTable::build(load_policy(opt), registry);
    ContextBundle ctx = load_context(opt);

    BenchReport bench;
    bench.program = p.name;
    bench.iterations = iterations;
    bench.model = calibrate(10000);

    auto series = [&](ExecMode mode, BenchSeries& out) {
        Sandbox sandbox(opt.size);
        std::optional<InstrumentedProgram> inst;
        if (mode == ExecMode::sandboxed)
            inst = instrument(p, sandbox.masks(), opt.allow_loops);
        KernelRingBuffer ringbuf(1 << 16);
        ArrayMap map(8, 64);
        ExecEnv env;
        env.registry = &registry;
        env.capabilities = &table;
        env.ringbuf = &ringbuf;
        env.map = &map;
        if (ctx.descriptor)
            env.context = {&*ctx.descriptor, &ctx.bytes, &ctx.regions};
        ExecOptions exec_opts;
        exec_opts.budget = opt.budget;
        exec_opts.mode = mode;
        double total = 0;
        for (uint64_t i = 0; i < iterations; ++i) {
            sandbox.reset();
            const auto t0 = std::chrono::steady_clock::now();
            const ExecutionResult r = mode == ExecMode::sandboxed
                                          ? execute(*inst, sandbox, env, exec_opts)
                                          : execute(p, sandbox, env, exec_opts);
            const auto t1 = std::chrono::steady_clock::now();
            const double ns = double(
                std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count());
            out.samples_ns.push_back(ns);
            total += ns;
            if (i + 1 == iterations) {
                bench.counters = r.counters;
                if (mode == ExecMode::sandboxed) {
                    bench.injected = inst->injected;
                    bench.breakdown = account(r.counters, bench.model);
                }
            }
        }
        out.mean_ns = total / double(iterations);
    };
    series(ExecMode::raw, bench.raw);
    series(ExecMode::sandboxed, bench.sandboxed);

    std::cout << (opt.json ? bench_report_json(bench) : bench_report_text(bench));
    if (opt.json)
        std::cout << "\n";
    return kExitOk;
}

int cmd_exploit_suite(const Options& opt) {
    const samples::ExploitReport report = samples::run_exploit_suite(opt.size);
    for (const auto& c : report.cases)
        std::cout << c.name << ": " << c.detail << "\n";
    const bool ok = report.all_raw_effects_shown && report.all_confined;
    std::cout << (ok ? "all cases confined\n" : "FAILURE: containment not demonstrated\n");
    return ok ? kExitOk : kExitEscape;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"user-space eBPF sandbox: SFI rewriting, CFI trampolines, interpreter"};
    app.require_subcommand(1);

    Options opt;
    app.add_option("--size", opt.size, "sandbox size in bytes (power of two)")
        ->capture_default_str();
    app.add_option("--budget", opt.budget, "instruction budget")->capture_default_str();
    app.add_option("--policy", opt.policy_path, "capability policy JSON file");
    app.add_option("--ctx", opt.ctx_path, "context descriptor JSON file");
    app.add_option("--payload", opt.payload_path, "payload file for the first context region");
    app.add_option("--type", opt.type_name, "program type (xdp | socket_filter)")
        ->capture_default_str();
    app.add_flag("--json", opt.json, "machine-readable output");
    app.add_flag("--detect", opt.detect, "record confinement events instead of silent masking");
    app.add_flag("--unsafe-raw", opt.unsafe_raw, "run without the sandbox (testing only)");
    app.add_flag("--allow-loops", opt.allow_loops, "permit backward jumps");

    std::string source, output, program;
    uint64_t iterations = 1000;

    CLI::App* asm_cmd = app.add_subcommand("asm", "assemble a source file to bytecode");
    asm_cmd->add_option("source", source)->required();
    asm_cmd->add_option("output", output)->required();

    CLI::App* precheck_cmd = app.add_subcommand("precheck", "run the first-pass checks");
    precheck_cmd->add_option("program", program)->required();

    CLI::App* instrument_cmd =
        app.add_subcommand("instrument", "insert masking and trampoline checks");
    instrument_cmd->add_option("program", program)->required();
    instrument_cmd->add_option("output", output);

    CLI::App* run_cmd = app.add_subcommand("run", "execute a program in the sandbox");
    run_cmd->add_option("program", program)->required();

    CLI::App* bench_cmd = app.add_subcommand("bench", "measure raw vs sandboxed timings");
    bench_cmd->add_option("program", program)->required();
    bench_cmd->add_option("--iterations", iterations, "iterations per mode")
        ->capture_default_str();

    CLI::App* exploit_cmd =
        app.add_subcommand("exploit-suite", "demonstrate and contain the bundled exploits");

    for (CLI::App* sub :
         {asm_cmd, precheck_cmd, instrument_cmd, run_cmd, bench_cmd, exploit_cmd})
        sub->fallthrough();

    CLI11_PARSE(app, argc, argv);

    try {
        if (asm_cmd->parsed())
            return cmd_asm(source, output);
        if (precheck_cmd->parsed())
            return cmd_precheck(opt, program);
        if (instrument_cmd->parsed())
            return cmd_instrument(opt, program, output);
        if (run_cmd->parsed())
            return cmd_run(opt, program);
        if (bench_cmd->parsed())
            return cmd_bench(opt, program, iterations);
        if (exploit_cmd->parsed())
            return cmd_exploit_suite(opt);
    } catch (const Trap& trap) {
        std::cerr << "trap: " << trap_reason_name(trap.reason) << ": " << trap.detail << "\n";
        return kExitTrap;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitParse;
    }
    return kExitParse;
}
