#pragma once

#include "sbpf/pss.hpp"
#include "sbpf/shmem.hpp"
#include "sbpf/wire.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sbpf::transport {

struct ServiceStats {
    std::uint64_t copy_bytes = 0;
    std::uint64_t round_trips = 0;
    std::uint64_t integrity_checks = 0;
    std::uint64_t integrity_rejections = 0;
    std::uint64_t verifier_invocations = 0;

    std::vector<std::uint8_t> encode() const;
    static ServiceStats decode(std::span<const std::uint8_t> bytes);
};

struct AllocReply {
    std::uint64_t base_handle = 0;
    std::string object_name;
};

struct RingDrainReply {
    std::uint64_t count = 0;
    std::uint64_t checksum = 0;
    std::uint64_t consumer_ns = 0;
};

/// Order-sensitive digest the ring consumers fold records into.
std::uint64_t fold_checksum(std::uint64_t acc, std::span<const std::uint8_t> record) noexcept;
inline constexpr std::uint64_t kChecksumSeed = 14695981039346656037ull;

/// Connects a socket address: a leading '@' selects the abstract namespace,
/// anything else is a filesystem path. Returns the fd or -1 with errno set.
int connect_socket(const std::string& address);

/// User side of the emulated user/kernel boundary. One per user thread; one
/// request in flight at a time.
class BoundaryChannel {
public:
    /// Throws ServiceUnavailable.
    static BoundaryChannel connect(const std::string& address);

    BoundaryChannel(BoundaryChannel&& other) noexcept;
    BoundaryChannel& operator=(BoundaryChannel&& other) noexcept;
    BoundaryChannel(const BoundaryChannel&) = delete;
    BoundaryChannel& operator=(const BoundaryChannel&) = delete;
    ~BoundaryChannel();

    /// One request/response exchange. Throws ChannelClosed.
    Response call(Opcode op, std::uint64_t id, std::span<const std::uint8_t> payload = {});

    /// The typed calls below throw sbpf::Error for a non-Ok status.
    AllocReply alloc(shmem::TaskId task, std::span<const std::uint8_t> container);
    std::string attach(shmem::TaskId task, std::uint64_t base_handle);
    void release(shmem::TaskId task);

    /// Copy path: path bytes out, record bytes back. Throws PathTooLong.
    StatRecord baseline_statfs(std::string_view path);
    /// Zero-copy path: only (opcode, thread) crosses.
    void doorbell_statfs(std::uint32_t thread_id);

    /// Emulated drain-per-record flow: one crossing per record.
    std::vector<std::uint8_t> baseline_drain_one(std::span<const std::uint8_t> record);
    RingDrainReply ring_doorbell(std::uint64_t expected_records);

    void pss_flush(std::span<const pss::UpdateRecord> records);

    ServiceStats stats();
    void shutdown();

    /// This channel's own boundary accounting.
    std::uint64_t copy_bytes() const noexcept { return copy_bytes_; }
    std::uint64_t round_trips() const noexcept { return round_trips_; }

    bool is_open() const noexcept { return fd_ >= 0; }
    void close() noexcept;

private:
    explicit BoundaryChannel(int fd) : fd_(fd) {}
    Response checked(Opcode op, std::uint64_t id, std::span<const std::uint8_t> payload);
    void count_copy(std::size_t request, std::size_t response) noexcept;

    int fd_ = -1;
    std::uint64_t copy_bytes_ = 0;
    std::uint64_t round_trips_ = 0;
    std::vector<std::uint8_t> buffer_;
};

} // namespace sbpf::transport
