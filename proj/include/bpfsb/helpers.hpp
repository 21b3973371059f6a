#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "bpfsb/sandbox.hpp"

namespace bpfsb {

// Helper ids follow the kernel's numbering for the implemented subset.
constexpr int32_t HELPER_MAP_LOOKUP = 1;
constexpr int32_t HELPER_GET_CURRENT_TASK = 35;
constexpr int32_t HELPER_RINGBUF_RESERVE = 131;
constexpr int32_t HELPER_RINGBUF_SUBMIT = 132;
constexpr int32_t HELPER_RINGBUF_DISCARD = 133;

// Opaque token returned by the get-current-task stub.
constexpr uint64_t TASK_TOKEN = 0x7a53'0000'0001ull;

class KernelRingBuffer;
class ArrayMap;

// External objects a helper may touch. They live outside the sandbox data
// region; the program only ever sees sandbox-heap copies.
struct HelperEnv {
    Sandbox& sandbox;
    KernelRingBuffer* ringbuf = nullptr;
    ArrayMap* map = nullptr;
};

using HelperArgs = std::array<uint64_t, 5>;
using HelperFn = std::function<uint64_t(HelperEnv&, const HelperArgs&)>;

struct HelperInfo {
    std::string name;
    HelperFn fn;
    int arg_count = 0;
};

class HelperRegistry {
public:
    void register_helper(int32_t id, HelperInfo info);
    void freeze() { frozen_ = true; }
    bool frozen() const { return frozen_; }
    const HelperInfo* find(int32_t id) const;
    const std::map<int32_t, HelperInfo>& entries() const { return helpers_; }

    // Registry with the bundled helpers, frozen.
    static HelperRegistry standard();

private:
    std::map<int32_t, HelperInfo> helpers_;
    bool frozen_ = false;
};

class KernelRingBuffer {
public:
    explicit KernelRingBuffer(uint64_t capacity) : capacity_(capacity) {}

    uint64_t capacity() const { return capacity_; }
    uint64_t available() const { return capacity_ - committed_bytes_ - reserved_bytes_; }
    const std::vector<std::vector<uint8_t>>& records() const { return records_; }

    // Returns a reservation id, or 0 when size is 0 or exceeds capacity.
    uint64_t open_reservation(uint64_t size);
    void commit(uint64_t reservation_id, std::span<const uint8_t> bytes);
    void discard(uint64_t reservation_id);

private:
    uint64_t capacity_;
    uint64_t committed_bytes_ = 0;
    uint64_t reserved_bytes_ = 0;
    uint64_t next_id_ = 1;
    std::map<uint64_t, uint64_t> open_; // id -> size
    std::vector<std::vector<uint8_t>> records_;
};

class ArrayMap {
public:
    ArrayMap(uint64_t value_size, uint64_t max_entries)
        : value_size_(value_size), max_entries_(max_entries),
          store_(value_size * max_entries, 0) {}

    uint64_t value_size() const { return value_size_; }
    uint64_t max_entries() const { return max_entries_; }
    std::span<uint8_t> value(uint64_t key) {
        return {store_.data() + key * value_size_, size_t(value_size_)};
    }
    std::span<const uint8_t> value(uint64_t key) const {
        return {store_.data() + key * value_size_, size_t(value_size_)};
    }

private:
    uint64_t value_size_;
    uint64_t max_entries_;
    std::vector<uint8_t> store_;
};

enum class FieldKind : uint8_t { scalar, region_address };

struct ContextField {
    std::string name;
    uint64_t offset = 0;
    uint64_t length = 0;
    bool writable = false;
    FieldKind kind = FieldKind::scalar;
    uint64_t region_len = 0; // 0: length taken from the supplied region
};

// A field named "<r>_end" of kind region_address does not consume a region;
// it is rewritten to the end address of region "<r>".
struct ContextDescriptor {
    uint64_t total_len = 0;
    std::vector<ContextField> fields;

    static ContextDescriptor from_json_text(const std::string& text);
};

// Copies the context and the auxiliary regions into the sandbox context
// area and rewrites region_address fields to the in-sandbox copies.
// Returns the context base address (goes into r1).
uint64_t mirror_context(Sandbox& sandbox, const ContextDescriptor& descriptor,
                        std::span<const uint8_t> context_bytes,
                        const std::vector<std::vector<uint8_t>>& regions);

// Write-back of writable fields and regions after a clean exit. Non-writable
// bytes are left bit-identical.
void sync_context(Sandbox& sandbox, const ContextDescriptor& descriptor,
                  std::span<uint8_t> context_bytes, std::vector<std::vector<uint8_t>>& regions);

// Ring-buffer mirroring: reserve allocates a sandbox-heap shadow; commit
// syncs it into the kernel object; discard drops it.
uint64_t ringbuf_reserve(Sandbox& sandbox, KernelRingBuffer& rb, uint64_t size);
void ringbuf_commit(Sandbox& sandbox, KernelRingBuffer& rb, uint64_t address);
void ringbuf_discard(Sandbox& sandbox, KernelRingBuffer& rb, uint64_t address);

// Map mirroring: lookup copies the value into a fresh heap buffer; sync
// writes live copies back at successful exit.
uint64_t map_lookup(Sandbox& sandbox, ArrayMap& map, uint64_t key);
void map_sync(Sandbox& sandbox, ArrayMap& map);

} // namespace bpfsb
