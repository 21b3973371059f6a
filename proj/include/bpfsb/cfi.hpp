#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <unordered_set>

#include "bpfsb/helpers.hpp"
#include "bpfsb/isa.hpp"

namespace bpfsb {

// program type -> allowed helper ids
using CapabilityPolicy = std::map<ProgramType, std::set<int32_t>>;

struct CallVerdict {
    bool allowed;
    int32_t helper_id;
};

// Per-program-type allowlist of helper ids with average constant-time
// membership. Immutable after build.
class CapabilityTable {
public:
    static CapabilityTable build(const CapabilityPolicy& policy, const HelperRegistry& registry);

    bool allowed(ProgramType type, int32_t helper_id) const {
        return entries_.count(key(type, helper_id)) != 0;
    }

private:
    static uint64_t key(ProgramType type, int32_t helper_id) {
        return uint64_t(uint8_t(type)) << 32 | uint32_t(helper_id);
    }
    std::unordered_set<uint64_t> entries_;
};

CallVerdict check_call(const CapabilityTable& table, ProgramType type, int32_t helper_id);

// The trusted trampoline: validates the call target, then invokes the
// registered helper. A denied or unregistered target raises a CFI trap with
// no helper side effects.
uint64_t dispatch(const CapabilityTable& table, ProgramType type, int32_t helper_id,
                  const HelperArgs& args, const HelperRegistry& registry, HelperEnv& env);

// Shipped defaults; the concrete helper-per-type matrix is configurable
// through a policy file (JSON: type name -> array of helper ids).
CapabilityPolicy default_policy();
CapabilityPolicy policy_from_json_text(const std::string& text);

} // namespace bpfsb
