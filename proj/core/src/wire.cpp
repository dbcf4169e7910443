#include "sbpf/wire.hpp"

#include <cerrno>
#include <cstring>

#include <sys/socket.h>
#include <unistd.h>

namespace sbpf::transport {

std::string_view to_string(Status status) noexcept
{
    switch (status) {
    case Status::Ok: return "Ok";
    case Status::IntegrityRejected: return "IntegrityRejected";
    case Status::VerificationRejected: return "VerificationRejected";
    case Status::AllocationFailed: return "AllocationFailed";
    case Status::NotFound: return "NotFound";
    case Status::InvalidThread: return "InvalidThread";
    case Status::LengthExceedsSlot: return "LengthExceedsSlot";
    case Status::BadRequest: return "BadRequest";
    case Status::AlreadyAllocated: return "AlreadyAllocated";
    case Status::PathTooLong: return "PathTooLong";
    case Status::Timeout: return "Timeout";
    }
    return "Unknown";
}

Errc to_errc(Status status) noexcept
{
    switch (status) {
    case Status::IntegrityRejected: return Errc::IntegrityRejected;
    case Status::VerificationRejected: return Errc::VerificationRejected;
    case Status::AllocationFailed: return Errc::AllocationFailed;
    case Status::NotFound: return Errc::NotFound;
    case Status::InvalidThread: return Errc::InvalidThread;
    case Status::LengthExceedsSlot: return Errc::LengthExceedsSlot;
    case Status::AlreadyAllocated: return Errc::AlreadyAllocated;
    case Status::PathTooLong: return Errc::PathTooLong;
    case Status::Ok:
    case Status::BadRequest:
    case Status::Timeout:
        break;
    }
    return Errc::ProtocolError;
}

Status to_status(Errc code) noexcept
{
    switch (code) {
    case Errc::IntegrityRejected: return Status::IntegrityRejected;
    case Errc::VerificationRejected: return Status::VerificationRejected;
    case Errc::AllocationFailed:
    case Errc::OutOfMemory: return Status::AllocationFailed;
    case Errc::NotFound: return Status::NotFound;
    case Errc::InvalidThread: return Status::InvalidThread;
    case Errc::LengthExceedsSlot: return Status::LengthExceedsSlot;
    case Errc::AlreadyAllocated: return Status::AlreadyAllocated;
    case Errc::PathTooLong: return Status::PathTooLong;
    default: return Status::BadRequest;
    }
}

void write_all(int fd, std::span<const std::uint8_t> bytes)
{
    std::size_t done = 0;
    while (done < bytes.size()) {
        const ssize_t n = ::send(fd, bytes.data() + done, bytes.size() - done, MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR)
                continue;
            throw Error(Errc::ChannelClosed, std::string("send: ") + std::strerror(errno));
        }
        done += static_cast<std::size_t>(n);
    }
}

bool read_exact(int fd, std::span<std::uint8_t> bytes)
{
    std::size_t done = 0;
    while (done < bytes.size()) {
        const ssize_t n = ::read(fd, bytes.data() + done, bytes.size() - done);
        if (n < 0) {
            if (errno == EINTR)
                continue;
            throw Error(Errc::ChannelClosed, std::string("read: ") + std::strerror(errno));
        }
        if (n == 0) {
            if (done == 0)
                return false;
            throw Error(Errc::ChannelClosed, "peer closed the channel mid-message");
        }
        done += static_cast<std::size_t>(n);
    }
    return true;
}

void put_u32(std::uint8_t* p, std::uint32_t v) noexcept
{
    for (int i = 0; i < 4; ++i)
        p[i] = static_cast<std::uint8_t>(v >> (8 * i));
}

void put_u64(std::uint8_t* p, std::uint64_t v) noexcept
{
    for (int i = 0; i < 8; ++i)
        p[i] = static_cast<std::uint8_t>(v >> (8 * i));
}

std::uint32_t get_u32(const std::uint8_t* p) noexcept
{
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
        v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    return v;
}

std::uint64_t get_u64(const std::uint8_t* p) noexcept
{
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
        v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
}

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) noexcept
{
    std::uint64_t h = 14695981039346656037ull;
    for (std::uint8_t b : bytes) {
        h ^= b;
        h *= 1099511628211ull;
    }
    return h;
}

std::array<std::uint8_t, kStatRecordSize> StatRecord::to_bytes() const noexcept
{
    std::array<std::uint8_t, kStatRecordSize> out{};
    put_u64(out.data(), path_len);
    put_u64(out.data() + 8, path_hash);
    put_u64(out.data() + 16, block_size);
    put_u64(out.data() + 24, blocks);
    return out;
}

StatRecord StatRecord::from_bytes(std::span<const std::uint8_t> bytes)
{
    if (bytes.size() != kStatRecordSize)
        throw Error(Errc::ProtocolError, "stat record must be 64 bytes, got " + std::to_string(bytes.size()));
    for (std::size_t i = 32; i < kStatRecordSize; ++i)
        if (bytes[i] != 0)
            throw Error(Errc::ProtocolError, "stat record padding is not zero");
    return {get_u64(bytes.data()), get_u64(bytes.data() + 8), get_u64(bytes.data() + 16), get_u64(bytes.data() + 24)};
}

StatRecord compute_stat(std::span<const std::uint8_t> path) noexcept
{
    const std::uint64_t hash = fnv1a64(path);
    return {path.size(), hash, kStatBlockSize, hash & ((1u << 20) - 1)};
}

} // namespace sbpf::transport
