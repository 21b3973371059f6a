#include "bpfsb/cfi.hpp"

#include <json.hpp>

namespace bpfsb {

CapabilityTable CapabilityTable::build(const CapabilityPolicy& policy,
                                       const HelperRegistry& registry) {
    CapabilityTable table;
    for (const auto& [type, ids] : policy) {
        for (int32_t id : ids) {
            if (!registry.find(id))
                throw UnknownHelper("policy references unregistered helper id " +
                                    std::to_string(id));
            table.entries_.insert(key(type, id));
        }
    }
    return table;
}

CallVerdict check_call(const CapabilityTable& table, ProgramType type, int32_t helper_id) {
    return {table.allowed(type, helper_id), helper_id};
}

uint64_t dispatch(const CapabilityTable& table, ProgramType type, int32_t helper_id,
                  const HelperArgs& args, const HelperRegistry& registry, HelperEnv& env) {
    if (!check_call(table, type, helper_id).allowed)
        throw Trap{TrapReason::CfiViolation,
                   "helper " + std::to_string(helper_id) + " is not a capability of " +
                       program_type_name(type)};
    const HelperInfo* info = registry.find(helper_id);
    if (!info)
        throw Trap{TrapReason::CfiViolation,
                   "helper " + std::to_string(helper_id) + " is not registered"};
    env.sandbox.metadata().counters.trampoline_executed++;
    return info->fn(env, args);
}

CapabilityPolicy default_policy() {
    return {
        {ProgramType::xdp,
         {HELPER_MAP_LOOKUP, HELPER_RINGBUF_RESERVE, HELPER_RINGBUF_SUBMIT,
          HELPER_RINGBUF_DISCARD}},
        {ProgramType::socket_filter,
         {HELPER_MAP_LOOKUP, HELPER_RINGBUF_RESERVE, HELPER_RINGBUF_SUBMIT,
          HELPER_RINGBUF_DISCARD, HELPER_GET_CURRENT_TASK}},
    };
}

CapabilityPolicy policy_from_json_text(const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text);
    CapabilityPolicy policy;
    for (const auto& [name, ids] : j.items()) {
        std::set<int32_t>& set = policy[program_type_from_name(name)];
        for (const auto& id : ids)
            set.insert(id.get<int32_t>());
    }
    return policy;
}

} // namespace bpfsb
