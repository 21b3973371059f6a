#include "bpfsb/sandbox.hpp"

#include <cstring>
#include <cstdlib>
#include <sstream>

namespace bpfsb {

static bool is_pow2(uint64_t v) { return v != 0 && (v & (v - 1)) == 0; }

AddressMasks compute_masks(uint64_t base, uint64_t size) {
    if (!is_pow2(size) || size < 64) {
        std::ostringstream oss;
        oss << "sandbox size " << size << " must be a power of two >= 64";
        throw BadSize(oss.str());
    }
    if (base & (size - 1)) {
        std::ostringstream oss;
        oss << "base 0x" << std::hex << base << " is not aligned to size 0x" << size;
        throw BadAlignment(oss.str());
    }
    return {size - 1, base};
}

Sandbox::Sandbox(uint64_t size, const LayoutProportions& proportions) {
    if (!is_pow2(size) || size < 64)
        throw BadSize("sandbox size " + std::to_string(size) + " must be a power of two >= 64");

    // The allocation carries 8 extra bytes past [base, base+size) so a
    // masked address at the top of the region plus an 8-byte access stays
    // in owned memory.
    void* raw = nullptr;
    if (posix_memalign(&raw, size_t(size), size_t(size) + 8) != 0 || !raw)
        throw AllocationFailure("failed to allocate " + std::to_string(size) +
                                " size-aligned bytes");
    data_ = static_cast<uint8_t*>(raw);
    size_ = size;
    std::memset(data_, 0, size + 8);

    masks_ = compute_masks(base(), size);

    auto round8 = [](uint64_t v) { return v & ~uint64_t(7); };
    const uint64_t usable = size - 8; // trailing red zone inside the region
    uint64_t ctx_len = round8(uint64_t(double(size) * proportions.context));
    uint64_t stack_len = round8(uint64_t(double(size) * proportions.stack));
    if (ctx_len + stack_len > usable)
        throw BadSize("layout proportions exceed the usable region");
    layout_.context_offset = 0;
    layout_.context_len = ctx_len;
    layout_.stack_offset = ctx_len;
    layout_.stack_len = stack_len;
    layout_.heap_offset = ctx_len + stack_len;
    layout_.heap_len = usable - ctx_len - stack_len;
    metadata_.heap_cursor = layout_.heap_offset;
}

void Sandbox::release() noexcept {
    std::free(data_);
    data_ = nullptr;
}

Sandbox::~Sandbox() { release(); }

Sandbox::Sandbox(Sandbox&& other) noexcept
    : size_(other.size_), data_(other.data_), masks_(other.masks_), layout_(other.layout_),
      metadata_(std::move(other.metadata_)) {
    other.data_ = nullptr;
    other.size_ = 0;
}

Sandbox& Sandbox::operator=(Sandbox&& other) noexcept {
    if (this != &other) {
        release();
        size_ = other.size_;
        data_ = other.data_;
        masks_ = other.masks_;
        layout_ = other.layout_;
        metadata_ = std::move(other.metadata_);
        other.data_ = nullptr;
        other.size_ = 0;
    }
    return *this;
}

uint64_t Sandbox::alloc_heap(uint64_t length) {
    if (length == 0)
        throw HeapExhausted("zero-length allocation");
    const uint64_t aligned = (metadata_.heap_cursor + 7) & ~uint64_t(7);
    const uint64_t heap_end = layout_.heap_offset + layout_.heap_len;
    if (aligned > heap_end || heap_end - aligned < length)
        throw HeapExhausted("heap allocation of " + std::to_string(length) +
                            " bytes does not fit");
    metadata_.heap_cursor = aligned + length;
    return base() + aligned;
}

void Sandbox::reset() {
    std::memset(data_, 0, size_ + 8);
    metadata_.heap_cursor = layout_.heap_offset;
    metadata_.mirror_map.clear();
    metadata_.counters = {};
    metadata_.confinement_events.clear();
}

} // namespace bpfsb
