#include "bpfsb/report.hpp"

#include <sstream>

#include <json.hpp>

namespace bpfsb {

namespace {

nlohmann::json counters_json(const ExecutedCounters& c) {
    return {{"mask_executed", c.mask_executed},
            {"trampoline_executed", c.trampoline_executed},
            {"instructions_retired", c.instructions_retired}};
}

nlohmann::json breakdown_json(const OverheadBreakdown& b) {
    return {{"c_mem", b.c_mem},
            {"c_tram", b.c_tram},
            {"c_manage", b.c_manage},
            {"c_overall", b.c_overall}};
}

} // namespace

std::string run_report_text(const ExecutionResult& result,
                            const std::vector<ConfinementEvent>& events) {
    std::ostringstream oss;
    if (result.status == ExecStatus::returned)
        oss << "returned " << result.return_value << "\n";
    else
        oss << "trap: " << trap_reason_name(result.trap_reason) << " (" << result.trap_detail
            << ")\n";
    oss << "instructions retired: " << result.counters.instructions_retired << "\n"
        << "mask checks executed: " << result.counters.mask_executed << "\n"
        << "trampoline checks executed: " << result.counters.trampoline_executed << "\n"
        << "overhead: c_mem=" << result.breakdown.c_mem
        << " c_tram=" << result.breakdown.c_tram << " c_manage=" << result.breakdown.c_manage
        << " c_overall=" << result.breakdown.c_overall << "\n";
    for (const ConfinementEvent& ev : events)
        oss << "confined: instruction " << ev.instruction_index << " address 0x" << std::hex
            << ev.original_address << " -> 0x" << ev.masked_address << std::dec << "\n";
    return oss.str();
}

std::string run_report_json(const ExecutionResult& result,
                            const std::vector<ConfinementEvent>& events) {
    nlohmann::json j;
    j["status"] = result.status == ExecStatus::returned ? "returned" : "trap";
    j["return_value"] = result.return_value;
    if (result.status == ExecStatus::trap) {
        j["trap_reason"] = trap_reason_name(result.trap_reason);
        j["trap_detail"] = result.trap_detail;
    }
    j["counters"] = counters_json(result.counters);
    j["breakdown"] = breakdown_json(result.breakdown);
    j["confinement_events"] = nlohmann::json::array();
    for (const ConfinementEvent& ev : events)
        j["confinement_events"].push_back({{"instruction_index", ev.instruction_index},
                                           {"original_address", ev.original_address},
                                           {"masked_address", ev.masked_address}});
    return j.dump(2);
}

std::string bench_report_text(const BenchReport& report) {
    std::ostringstream oss;
    oss << "program: " << report.program << "\n"
        << "iterations: " << report.iterations << "\n"
        << "raw mean: " << report.raw.mean_ns << " ns\n"
        << "sandboxed mean: " << report.sandboxed.mean_ns << " ns\n"
        << "mask checks executed: " << report.counters.mask_executed << " of "
        << report.injected.mask_checks << " injected\n"
        << "trampoline checks executed: " << report.counters.trampoline_executed << " of "
        << report.injected.trampoline_checks << " injected\n"
        << "model: unit_mask=" << report.model.unit_mask_cost
        << " unit_trampoline=" << report.model.unit_trampoline_cost
        << " manage=" << report.model.manage_cost << " (ns)\n"
        << "breakdown: c_mem=" << report.breakdown.c_mem
        << " c_tram=" << report.breakdown.c_tram
        << " c_manage=" << report.breakdown.c_manage
        << " c_overall=" << report.breakdown.c_overall << " (ns)\n";
    return oss.str();
}

std::string bench_report_json(const BenchReport& report) {
    nlohmann::json j;
    j["program"] = report.program;
    j["iterations"] = report.iterations;
    j["raw"] = {{"mean_ns", report.raw.mean_ns}, {"samples_ns", report.raw.samples_ns}};
    j["sandboxed"] = {{"mean_ns", report.sandboxed.mean_ns},
                      {"samples_ns", report.sandboxed.samples_ns}};
    j["counters"] = counters_json(report.counters);
    j["injected"] = {{"mask_checks", report.injected.mask_checks},
                     {"trampoline_checks", report.injected.trampoline_checks},
                     {"original_bytes", report.injected.original_bytes},
                     {"instrumented_bytes", report.injected.instrumented_bytes},
                     {"growth_percent", report.injected.growth_percent}};
    j["model"] = {{"unit_mask_cost", report.model.unit_mask_cost},
                  {"unit_trampoline_cost", report.model.unit_trampoline_cost},
                  {"manage_cost", report.model.manage_cost}};
    j["breakdown"] = breakdown_json(report.breakdown);
    return j.dump(2);
}

} // namespace bpfsb
