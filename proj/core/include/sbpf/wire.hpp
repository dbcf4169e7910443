#pragma once

#include "sbpf/error.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

/// Control channel framing and the synthetic statfs record.
///
/// Request:  op u8 | id u64 | len u32 | payload
/// Response: status u8 | len u32 | payload
/// All integers little-endian.
namespace sbpf::transport {

enum class Opcode : std::uint8_t {
    Alloc = 1,          // id = task, payload = .sbpf container -> handle u64, object name
    Release = 2,        // id = task
    BaselineStatfs = 3, // payload = path -> 64-byte StatRecord
    DoorbellStatfs = 4, // id = thread
    Shutdown = 5,
    Stats = 6,          // -> 5 x u64, see ServiceStats
    Attach = 7,         // id = task, payload = handle u64 -> object name
    RingDrainOne = 8,   // payload = one record -> echoed record
    PssFlush = 9,       // payload = encoded UpdateBatch
    RingDoorbell = 10,  // id = expected record count -> count, checksum, consumer_ns
};

enum class Status : std::uint8_t {
    Ok = 0,
    IntegrityRejected = 1,
    VerificationRejected = 2,
    AllocationFailed = 3,
    NotFound = 4,
    InvalidThread = 5,
    LengthExceedsSlot = 6,
    BadRequest = 7,
    AlreadyAllocated = 8,
    PathTooLong = 9,
    Timeout = 10,
};

inline constexpr std::size_t kRequestHeaderSize = 1 + 8 + 4;
inline constexpr std::size_t kResponseHeaderSize = 1 + 4;
inline constexpr std::uint32_t kMaxPayload = 16u << 20;

struct Request {
    Opcode op{};
    std::uint64_t id = 0;
    std::vector<std::uint8_t> payload;
};

struct Response {
    Status status = Status::Ok;
    std::vector<std::uint8_t> payload;
};

std::string_view to_string(Status status) noexcept;
/// Error code a client raises for a non-Ok status.
Errc to_errc(Status status) noexcept;
/// Status a service reports for an error code.
Status to_status(Errc code) noexcept;

/// Writes the whole buffer. Throws ChannelClosed.
void write_all(int fd, std::span<const std::uint8_t> bytes);
/// Reads exactly bytes.size() bytes. Returns false on a clean EOF before the
/// first byte; throws ChannelClosed on EOF mid-buffer or I/O error.
bool read_exact(int fd, std::span<std::uint8_t> bytes);

void put_u32(std::uint8_t* p, std::uint32_t v) noexcept;
void put_u64(std::uint8_t* p, std::uint64_t v) noexcept;
std::uint32_t get_u32(const std::uint8_t* p) noexcept;
std::uint64_t get_u64(const std::uint8_t* p) noexcept;

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) noexcept;
inline std::uint64_t fnv1a64(std::string_view s) noexcept
{
    return fnv1a64(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
}

inline constexpr std::size_t kStatRecordSize = 64;
inline constexpr std::size_t kMaxPathLen = 4095;
inline constexpr std::uint64_t kStatBlockSize = 4096;

struct StatRecord {
    std::uint64_t path_len = 0;
    std::uint64_t path_hash = 0;
    std::uint64_t block_size = 0;
    std::uint64_t blocks = 0;

    std::array<std::uint8_t, kStatRecordSize> to_bytes() const noexcept;
    static StatRecord from_bytes(std::span<const std::uint8_t> bytes);

    friend bool operator==(const StatRecord&, const StatRecord&) = default;
};

/// Deterministic statfs stand-in: a function of the path bytes only.
StatRecord compute_stat(std::span<const std::uint8_t> path) noexcept;
inline StatRecord compute_stat(std::string_view path) noexcept
{
    return compute_stat(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(path.data()), path.size()));
}

} // namespace sbpf::transport
