#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <vector>

#include "bpfsb/errors.hpp"

namespace bpfsb {

struct AddressMasks {
    uint64_t and_mask = 0;
    uint64_t or_mask = 0;
};

// and_mask = size - 1, or_mask = base; requires size a power of two >= 64
// and base aligned to size.
AddressMasks compute_masks(uint64_t base, uint64_t size);

// (address & and_mask) | or_mask. Total: masking never faults, it confines.
inline uint64_t mask_address(const AddressMasks& masks, uint64_t address) {
    return (address & masks.and_mask) | masks.or_mask;
}

struct ExecutedCounters {
    uint64_t mask_executed = 0;
    uint64_t trampoline_executed = 0;
    uint64_t instructions_retired = 0;
};

enum class MirrorKind : uint8_t { ringbuf_reservation, map_value, context_field };
enum class MirrorState : uint8_t { reserved, committed, discarded, live };

struct MirrorEntry {
    MirrorKind kind;
    uint64_t kernel_ref; // reservation id or map key
    uint64_t length;
    MirrorState state;
};

struct ConfinementEvent {
    size_t instruction_index;
    uint64_t original_address;
    uint64_t masked_address;
};

// Trusted bookkeeping: lives in ordinary host memory owned by the Sandbox
// object, never inside the maskable data region.
struct SandboxMetadata {
    uint64_t heap_cursor = 0; // offset from region base
    std::map<uint64_t, MirrorEntry> mirror_map; // keyed by sandbox address
    ExecutedCounters counters;
    std::vector<ConfinementEvent> confinement_events;
    bool detect_mode = false;
};

struct SandboxLayout {
    uint64_t context_offset = 0;
    uint64_t context_len = 0;
    uint64_t stack_offset = 0;
    uint64_t stack_len = 0;
    uint64_t heap_offset = 0;
    uint64_t heap_len = 0;
};

struct LayoutProportions {
    double context = 0.25;
    double stack = 0.25;
    // Heap takes the remainder up to size - 8 (trailing red zone).
};

class Sandbox {
public:
    explicit Sandbox(uint64_t size, const LayoutProportions& proportions = {});
    ~Sandbox();

    Sandbox(const Sandbox&) = delete;
    Sandbox& operator=(const Sandbox&) = delete;
    Sandbox(Sandbox&& other) noexcept;
    Sandbox& operator=(Sandbox&& other) noexcept;

    uint64_t base() const { return reinterpret_cast<uint64_t>(data_); }
    uint64_t size() const { return size_; }
    const AddressMasks& masks() const { return masks_; }
    const SandboxLayout& layout() const { return layout_; }

    SandboxMetadata& metadata() { return metadata_; }
    const SandboxMetadata& metadata() const { return metadata_; }

    bool contains(uint64_t address) const { return address >= base() && address < base() + size_; }

    uint8_t* data() { return data_; }
    const uint8_t* data() const { return data_; }
    uint8_t* at(uint64_t address) { return data_ + (address - base()); }
    const uint8_t* at(uint64_t address) const { return data_ + (address - base()); }

    uint64_t context_base() const { return base() + layout_.context_offset; }
    uint64_t stack_top() const { return base() + layout_.stack_offset + layout_.stack_len; }

    // Bump allocation, 8-byte aligned; throws HeapExhausted.
    uint64_t alloc_heap(uint64_t length);

    // Zero the data region, reset the cursor, clear mirrors and counters.
    // Masks are unchanged.
    void reset();

private:
    void release() noexcept;

    uint64_t size_ = 0;
    uint8_t* data_ = nullptr;
    AddressMasks masks_;
    SandboxLayout layout_;
    SandboxMetadata metadata_;
};

} // namespace bpfsb
