#pragma once

#include <string>
#include <vector>

#include "bpfsb/executor.hpp"

namespace bpfsb {

// Human-readable and JSON renderings of execution and benchmark results,
// shared by the CLI and the schema conformance tests.

std::string run_report_text(const ExecutionResult& result,
                            const std::vector<ConfinementEvent>& events);
std::string run_report_json(const ExecutionResult& result,
                            const std::vector<ConfinementEvent>& events);

struct BenchSeries {
    double mean_ns = 0;
    std::vector<double> samples_ns;
};

struct BenchReport {
    std::string program;
    uint64_t iterations = 0;
    BenchSeries raw;
    BenchSeries sandboxed;
    ExecutedCounters counters; // from one sandboxed execution
    InjectedStats injected;
    CostModel model;
    OverheadBreakdown breakdown;
};

std::string bench_report_text(const BenchReport& report);
std::string bench_report_json(const BenchReport& report);

} // namespace bpfsb
