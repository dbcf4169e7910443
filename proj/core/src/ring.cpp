#include "sbpf/ring.hpp"

#include <stdexcept>

namespace sbpf::ring {

SpscRing::SpscRing(std::span<std::uint8_t> region, std::size_t capacity)
    : region_(region), capacity_(capacity), mask_(capacity - 1)
{
    if (capacity < 64 || !std::has_single_bit(capacity) || region.size() < kHeaderSize + capacity)
        throw std::invalid_argument("ring capacity must be a power of two that fits the region");
    if (reinterpret_cast<std::uintptr_t>(region.data()) % 8 != 0)
        throw std::invalid_argument("ring region must be 8-byte aligned");
    cached_head_ = head();
    cached_tail_ = tail();
}

void SpscRing::reset() noexcept
{
    tail_ref().store(0, std::memory_order_release);
    head_ref().store(0, std::memory_order_release);
    cached_head_ = 0;
    cached_tail_ = 0;
}

std::uint64_t SpscRing::occupancy() const noexcept
{
    const std::uint64_t h = head();
    const std::uint64_t t = tail();
    return t - h;
}

PushResult SpscRing::push(std::span<const std::uint8_t> payload)
{
    if (payload.empty() || payload.size() > max_record_len())
        throw Error(Errc::RecordTooLarge, "record of " + std::to_string(payload.size())
                                              + " bytes outside [1, " + std::to_string(max_record_len()) + "]");
    const std::size_t need = record_footprint(payload.size());
    std::uint64_t tail = tail_ref().load(std::memory_order_relaxed);

    auto has_room = [&](std::size_t bytes) {
        if (tail - cached_head_ + bytes <= capacity_)
            return true;
        cached_head_ = head_ref().load(std::memory_order_acquire);
        return tail - cached_head_ + bytes <= capacity_;
    };

    std::size_t pos = static_cast<std::size_t>(tail & mask_);
    const std::size_t to_end = capacity_ - pos;
    if (need > to_end) {
        if (!has_room(to_end))
            return PushResult::Full;
        write_length(pos, kSkipFlag | static_cast<std::uint32_t>(to_end));
        tail += to_end;
        tail_ref().store(tail, std::memory_order_release);
        pos = 0;
    }
    if (!has_room(need))
        return PushResult::Full;

    const std::uint32_t len = static_cast<std::uint32_t>(payload.size());
    std::uint8_t* rec = data() + pos;
    std::memcpy(rec, &len, 4);
    std::memset(rec + 4, 0, 4);
    std::memcpy(rec + kRecordHeaderSize, payload.data(), payload.size());
    tail_ref().store(tail + need, std::memory_order_release);
    return PushResult::Ok;
}

std::vector<RingRecord> SpscRing::drain_batch(std::size_t max_records)
{
    std::vector<RingRecord> out;
    consume(max_records, [&](std::span<const std::uint8_t> bytes) {
        out.push_back(RingRecord{std::vector<std::uint8_t>(bytes.begin(), bytes.end())});
    });
    return out;
}

} // namespace sbpf::ring
