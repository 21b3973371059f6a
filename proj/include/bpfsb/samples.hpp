#pragma once

#include <functional>
#include <string>
#include <vector>

#include "bpfsb/helpers.hpp"
#include "bpfsb/isa.hpp"
#include "bpfsb/sandbox.hpp"

namespace bpfsb::samples {

struct SampleProgram {
    std::string name;
    ProgramType type;
    std::string asm_text;
};

// Packet-size logger: reads data/data_end from the context and records the
// length in an array map.
SampleProgram xdp_packet_logger();
// Exchanges packet records with user space through the ring buffer.
SampleProgram socket_filter_ringbuf();
// Compute-heavy balancer stand-in: a large branchy body whose common path
// executes only a small fraction of the inserted checks.
SampleProgram katran_style_balancer();

const std::vector<SampleProgram>& bundled_samples();
const SampleProgram* find_sample(const std::string& name);

// Context with data/data_end region-address fields, as packet-driven
// programs expect.
ContextDescriptor packet_context_descriptor();

enum class ExploitEffect : uint8_t { oob_read, oob_write };

// Each case encodes the effect class of a verifier-bypass: an
// attacker-controlled out-of-bounds address reaching a load or store.
// make_context builds the 16-byte context from the live sandbox and the
// canary address, standing in for the leaked/scalar-confused pointer.
struct ExploitCase {
    std::string name;
    std::string description;
    std::string asm_text;
    ExploitEffect effect;
    std::function<std::vector<uint8_t>(const Sandbox&, uint64_t canary_addr)> make_context;
};

ContextDescriptor exploit_context_descriptor();
std::vector<ExploitCase> exploit_corpus();

struct ExploitCaseResult {
    std::string name;
    bool raw_effect_shown = false;
    bool confined = false;
    std::string detail;
};

struct ExploitReport {
    std::vector<ExploitCaseResult> cases;
    bool all_raw_effects_shown = true;
    bool all_confined = true;
};

// Runs every bundled case raw (asserting the out-of-bounds effect
// manifests) and then sandboxed (asserting full confinement).
ExploitReport run_exploit_suite(uint64_t sandbox_size = 4096);

} // namespace bpfsb::samples
