#include "bpfsb/helpers.hpp"

#include <algorithm>
#include <cstring>

#include <json.hpp>

namespace bpfsb {

void HelperRegistry::register_helper(int32_t id, HelperInfo info) {
    if (frozen_)
        throw Error("helper registry is frozen");
    if (helpers_.count(id))
        throw Error("duplicate helper id " + std::to_string(id));
    helpers_.emplace(id, std::move(info));
}

const HelperInfo* HelperRegistry::find(int32_t id) const {
    auto it = helpers_.find(id);
    return it == helpers_.end() ? nullptr : &it->second;
}

uint64_t KernelRingBuffer::open_reservation(uint64_t size) {
    if (size == 0 || size > available())
        return 0;
    const uint64_t id = next_id_++;
    open_.emplace(id, size);
    reserved_bytes_ += size;
    return id;
}

void KernelRingBuffer::commit(uint64_t reservation_id, std::span<const uint8_t> bytes) {
    auto it = open_.find(reservation_id);
    if (it == open_.end() || it->second != bytes.size())
        throw Trap{TrapReason::InvalidReservation, "commit of unknown reservation"};
    reserved_bytes_ -= it->second;
    committed_bytes_ += it->second;
    records_.emplace_back(bytes.begin(), bytes.end());
    open_.erase(it);
}

void KernelRingBuffer::discard(uint64_t reservation_id) {
    auto it = open_.find(reservation_id);
    if (it == open_.end())
        throw Trap{TrapReason::InvalidReservation, "discard of unknown reservation"};
    reserved_bytes_ -= it->second;
    open_.erase(it);
}

uint64_t ringbuf_reserve(Sandbox& sandbox, KernelRingBuffer& rb, uint64_t size) {
    const uint64_t id = rb.open_reservation(size);
    if (id == 0)
        return 0;
    uint64_t addr;
    try {
        addr = sandbox.alloc_heap(size);
    } catch (const HeapExhausted&) {
        rb.discard(id);
        return 0;
    }
    sandbox.metadata().mirror_map.emplace(
        addr, MirrorEntry{MirrorKind::ringbuf_reservation, id, size, MirrorState::reserved});
    return addr;
}

// Commit requires the exact reservation base; derived addresses are treated
// as adversarial handles.
static MirrorEntry& reserved_entry(Sandbox& sandbox, uint64_t address) {
    auto it = sandbox.metadata().mirror_map.find(address);
    if (it == sandbox.metadata().mirror_map.end() ||
        it->second.kind != MirrorKind::ringbuf_reservation ||
        it->second.state != MirrorState::reserved)
        throw Trap{TrapReason::InvalidReservation,
                   "no live reservation at the given address"};
    return it->second;
}

void ringbuf_commit(Sandbox& sandbox, KernelRingBuffer& rb, uint64_t address) {
    MirrorEntry& entry = reserved_entry(sandbox, address);
    rb.commit(entry.kernel_ref, {sandbox.at(address), size_t(entry.length)});
    entry.state = MirrorState::committed;
}

void ringbuf_discard(Sandbox& sandbox, KernelRingBuffer& rb, uint64_t address) {
    MirrorEntry& entry = reserved_entry(sandbox, address);
    rb.discard(entry.kernel_ref);
    entry.state = MirrorState::discarded;
}

uint64_t map_lookup(Sandbox& sandbox, ArrayMap& map, uint64_t key) {
    if (key >= map.max_entries())
        return 0;
    uint64_t addr;
    try {
        addr = sandbox.alloc_heap(map.value_size());
    } catch (const HeapExhausted&) {
        return 0;
    }
    auto value = map.value(key);
    std::memcpy(sandbox.at(addr), value.data(), value.size());
    sandbox.metadata().mirror_map.emplace(
        addr, MirrorEntry{MirrorKind::map_value, key, map.value_size(), MirrorState::live});
    return addr;
}

void map_sync(Sandbox& sandbox, ArrayMap& map) {
    for (const auto& [addr, entry] : sandbox.metadata().mirror_map) {
        if (entry.kind != MirrorKind::map_value || entry.state != MirrorState::live)
            continue;
        auto value = map.value(entry.kernel_ref);
        std::memcpy(value.data(), sandbox.at(addr), value.size());
    }
}

static uint64_t round8(uint64_t v) { return (v + 7) & ~uint64_t(7); }

// Region-introducing fields in declaration order; "<r>_end" fields resolve
// against the region introduced by field "<r>".
static bool is_end_field(const ContextField& f) {
    return f.kind == FieldKind::region_address && f.name.ends_with("_end");
}

struct RegionPlacement {
    std::string name;
    uint64_t sandbox_addr;
    uint64_t length;
    size_t region_index;
};

static std::vector<RegionPlacement> place_regions(const Sandbox& sandbox,
                                                  const ContextDescriptor& descriptor,
                                                  const std::vector<std::vector<uint8_t>>& regions) {
    std::vector<RegionPlacement> placed;
    uint64_t cursor = sandbox.layout().context_offset + round8(descriptor.total_len);
    size_t next_region = 0;
    for (const ContextField& f : descriptor.fields) {
        if (f.kind != FieldKind::region_address || is_end_field(f))
            continue;
        if (next_region >= regions.size())
            throw ContextTooLarge("no auxiliary region supplied for field '" + f.name + "'");
        uint64_t len = regions[next_region].size();
        if (f.region_len != 0 && f.region_len != len)
            throw ContextTooLarge("region for field '" + f.name + "' has length " +
                                  std::to_string(len) + ", descriptor fixes " +
                                  std::to_string(f.region_len));
        placed.push_back({f.name, sandbox.base() + cursor, len, next_region});
        cursor += round8(len);
        ++next_region;
    }
    const uint64_t ctx_end = sandbox.layout().context_offset + sandbox.layout().context_len;
    if (cursor > ctx_end)
        throw ContextTooLarge("context plus regions exceed the context area");
    return placed;
}

uint64_t mirror_context(Sandbox& sandbox, const ContextDescriptor& descriptor,
                        std::span<const uint8_t> context_bytes,
                        const std::vector<std::vector<uint8_t>>& regions) {
    if (context_bytes.size() != descriptor.total_len)
        throw ContextTooLarge("context byte length does not match the descriptor");
    if (descriptor.total_len > sandbox.layout().context_len)
        throw ContextTooLarge("context does not fit the context area");

    const std::vector<RegionPlacement> placed = place_regions(sandbox, descriptor, regions);

    const uint64_t ctx_base = sandbox.context_base();
    if (descriptor.total_len > 0)
        std::memcpy(sandbox.at(ctx_base), context_bytes.data(), context_bytes.size());
    for (const RegionPlacement& r : placed)
        if (r.length > 0)
            std::memcpy(sandbox.at(r.sandbox_addr), regions[r.region_index].data(),
                        size_t(r.length));

    auto write_field_addr = [&](const ContextField& f, uint64_t value) {
        if (f.length != 8)
            throw ContextTooLarge("region_address field '" + f.name + "' must be 8 bytes");
        std::memcpy(sandbox.at(ctx_base + f.offset), &value, 8);
    };
    for (const ContextField& f : descriptor.fields) {
        if (f.kind != FieldKind::region_address)
            continue;
        std::string region_name = is_end_field(f) ? f.name.substr(0, f.name.size() - 4) : f.name;
        auto it = std::find_if(placed.begin(), placed.end(),
                               [&](const RegionPlacement& r) { return r.name == region_name; });
        if (it == placed.end())
            throw ContextTooLarge("field '" + f.name + "' references unknown region '" +
                                  region_name + "'");
        write_field_addr(f, is_end_field(f) ? it->sandbox_addr + it->length : it->sandbox_addr);
    }

    if (descriptor.total_len > 0)
        sandbox.metadata().mirror_map.emplace(
            ctx_base,
            MirrorEntry{MirrorKind::context_field, 0, descriptor.total_len, MirrorState::live});
    return ctx_base;
}

void sync_context(Sandbox& sandbox, const ContextDescriptor& descriptor,
                  std::span<uint8_t> context_bytes, std::vector<std::vector<uint8_t>>& regions) {
    const std::vector<RegionPlacement> placed = place_regions(sandbox, descriptor, regions);
    const uint64_t ctx_base = sandbox.context_base();
    for (const ContextField& f : descriptor.fields) {
        if (!f.writable)
            continue;
        if (f.kind == FieldKind::scalar) {
            std::memcpy(context_bytes.data() + f.offset, sandbox.at(ctx_base + f.offset),
                        size_t(f.length));
        } else if (!is_end_field(f)) {
            auto it = std::find_if(placed.begin(), placed.end(),
                                   [&](const RegionPlacement& r) { return r.name == f.name; });
            if (it != placed.end() && it->length > 0)
                std::memcpy(regions[it->region_index].data(), sandbox.at(it->sandbox_addr),
                            size_t(it->length));
        }
    }
}

ContextDescriptor ContextDescriptor::from_json_text(const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text);
    ContextDescriptor d;
    d.total_len = j.at("total_len").get<uint64_t>();
    for (const auto& jf : j.at("fields")) {
        ContextField f;
        f.name = jf.at("name").get<std::string>();
        f.offset = jf.at("offset").get<uint64_t>();
        f.length = jf.at("length").get<uint64_t>();
        f.writable = jf.at("writable").get<bool>();
        const std::string kind = jf.at("kind").get<std::string>();
        if (kind == "scalar")
            f.kind = FieldKind::scalar;
        else if (kind == "region_address")
            f.kind = FieldKind::region_address;
        else
            throw Error("unknown context field kind '" + kind + "'");
        if (jf.contains("region_len"))
            f.region_len = jf.at("region_len").get<uint64_t>();
        if (f.offset + f.length > d.total_len)
            throw Error("context field '" + f.name + "' exceeds total_len");
        d.fields.push_back(std::move(f));
    }
    return d;
}

HelperRegistry HelperRegistry::standard() {
    HelperRegistry reg;
    reg.register_helper(HELPER_MAP_LOOKUP,
                        {"map_lookup_elem",
                         [](HelperEnv& env, const HelperArgs& args) -> uint64_t {
                             if (!env.map)
                                 return 0;
                             return map_lookup(env.sandbox, *env.map, args[1]);
                         },
                         2});
    reg.register_helper(HELPER_GET_CURRENT_TASK,
                        {"get_current_task",
                         [](HelperEnv&, const HelperArgs&) -> uint64_t { return TASK_TOKEN; },
                         0});
    reg.register_helper(HELPER_RINGBUF_RESERVE,
                        {"ringbuf_reserve",
                         [](HelperEnv& env, const HelperArgs& args) -> uint64_t {
                             if (!env.ringbuf)
                                 return 0;
                             return ringbuf_reserve(env.sandbox, *env.ringbuf, args[1]);
                         },
                         3});
    reg.register_helper(HELPER_RINGBUF_SUBMIT,
                        {"ringbuf_submit",
                         [](HelperEnv& env, const HelperArgs& args) -> uint64_t {
                             if (!env.ringbuf)
                                 throw Trap{TrapReason::InvalidReservation,
                                            "no ring buffer bound"};
                             ringbuf_commit(env.sandbox, *env.ringbuf, args[0]);
                             return 0;
                         },
                         2});
    reg.register_helper(HELPER_RINGBUF_DISCARD,
                        {"ringbuf_discard",
                         [](HelperEnv& env, const HelperArgs& args) -> uint64_t {
                             if (!env.ringbuf)
                                 throw Trap{TrapReason::InvalidReservation,
                                            "no ring buffer bound"};
                             ringbuf_discard(env.sandbox, *env.ringbuf, args[0]);
                             return 0;
                         },
                         2});
    reg.freeze();
    return reg;
}

} // namespace bpfsb
