#pragma once

#include "sbpf/error.hpp"

#include <atomic>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <span>
#include <vector>

/// Single-producer single-consumer ring of variable-length records living in
/// a shared memory region.
///
/// Region layout (little-endian):
///   [0, 8)     tail: producer cursor, total bytes ever published
///   [64, 72)   head: consumer cursor, total bytes ever consumed
///   [128, ...) data area of `capacity` bytes (power of two)
///
/// Each record is an 8-byte header (u32 length, u32 reserved) followed by the
/// payload padded to 8 bytes. Records never straddle the end of the data
/// area; the producer fills the remainder with a skip marker (length with
/// the high bit set) and restarts at offset 0.
namespace sbpf::ring {

inline constexpr std::size_t kTailOffset = 0;
inline constexpr std::size_t kHeadOffset = 64;
inline constexpr std::size_t kHeaderSize = 128;
inline constexpr std::size_t kRecordHeaderSize = 8;
inline constexpr std::uint32_t kSkipFlag = 0x8000'0000u;

static_assert(std::atomic_ref<std::uint64_t>::is_always_lock_free);

/// Largest power-of-two data area that fits a region of `region_size` bytes.
constexpr std::size_t capacity_for(std::size_t region_size) noexcept
{
    return region_size <= kHeaderSize ? 0 : std::bit_floor(region_size - kHeaderSize);
}

constexpr std::size_t align8(std::size_t n) noexcept { return (n + 7) & ~std::size_t{7}; }

/// Bytes a record of `len` payload bytes occupies in the data area.
constexpr std::size_t record_footprint(std::size_t len) noexcept { return kRecordHeaderSize + align8(len); }

enum class PushResult { Ok, Full };

struct RingRecord {
    std::vector<std::uint8_t> payload;

    std::uint32_t len() const noexcept { return static_cast<std::uint32_t>(payload.size()); }
    friend bool operator==(const RingRecord&, const RingRecord&) = default;
};

/// Non-owning view over a ring region. The producer and consumer each hold
/// their own view; a view must only be used from one side.
class SpscRing {
public:
    /// Attaches to an existing ring. A zero-filled region is a valid empty ring.
    SpscRing(std::span<std::uint8_t> region, std::size_t capacity);
    explicit SpscRing(std::span<std::uint8_t> region) : SpscRing(region, capacity_for(region.size())) {}

    /// Resets both cursors. Only valid while neither side is active.
    void reset() noexcept;

    std::size_t capacity() const noexcept { return capacity_; }
    std::size_t max_record_len() const noexcept { return capacity_ - 16; }

    std::uint64_t head() const noexcept { return head_ref().load(std::memory_order_acquire); }
    std::uint64_t tail() const noexcept { return tail_ref().load(std::memory_order_acquire); }
    std::uint64_t occupancy() const noexcept;

    /// Producer side. Throws RecordTooLarge when the payload is empty or
    /// larger than max_record_len().
    PushResult push(std::span<const std::uint8_t> payload);

    /// Consumer side. Copies out up to `max_records` records in FIFO order.
    std::vector<RingRecord> drain_batch(std::size_t max_records);

    /// Consumer side, zero-copy: calls `fn(std::span<const std::uint8_t>)`
    /// for each record in place, then publishes the new head once.
    template <class Fn>
    std::size_t consume(std::size_t max_records, Fn&& fn);

private:
    std::atomic_ref<std::uint64_t> tail_ref() const noexcept
    {
        return std::atomic_ref<std::uint64_t>(*reinterpret_cast<std::uint64_t*>(region_.data() + kTailOffset));
    }
    std::atomic_ref<std::uint64_t> head_ref() const noexcept
    {
        return std::atomic_ref<std::uint64_t>(*reinterpret_cast<std::uint64_t*>(region_.data() + kHeadOffset));
    }
    std::uint8_t* data() const noexcept { return region_.data() + kHeaderSize; }

    void write_length(std::size_t pos, std::uint32_t value) noexcept { std::memcpy(data() + pos, &value, 4); }
    std::uint32_t read_length(std::size_t pos) const noexcept
    {
        std::uint32_t value;
        std::memcpy(&value, data() + pos, 4);
        return value;
    }

    std::span<std::uint8_t> region_;
    std::size_t capacity_;
    std::size_t mask_;
    // Side-local snapshots of the other side's cursor.
    std::uint64_t cached_head_ = 0;
    std::uint64_t cached_tail_ = 0;
};

template <class Fn>
std::size_t SpscRing::consume(std::size_t max_records, Fn&& fn)
{
    std::uint64_t head = head_ref().load(std::memory_order_relaxed);
    std::size_t taken = 0;
    while (taken < max_records) {
        if (head == cached_tail_) {
            cached_tail_ = tail_ref().load(std::memory_order_acquire);
            if (head == cached_tail_)
                break;
        }
        const std::size_t pos = static_cast<std::size_t>(head & mask_);
        const std::uint32_t len = read_length(pos);
        if (len & kSkipFlag) {
            head += capacity_ - pos;
            continue;
        }
        fn(std::span<const std::uint8_t>(data() + pos + kRecordHeaderSize, len));
        head += record_footprint(len);
        ++taken;
    }
    head_ref().store(head, std::memory_order_release);
    return taken;
}

} // namespace sbpf::ring
