#include "sbpf/channel.hpp"

#include <cerrno>
#include <cstring>

#include <sys/socket.h>
#include <sys/un.h>
#include <unistd.h>

namespace sbpf::transport {

std::vector<std::uint8_t> ServiceStats::encode() const
{
    std::vector<std::uint8_t> out(40);
    put_u64(out.data(), copy_bytes);
    put_u64(out.data() + 8, round_trips);
    put_u64(out.data() + 16, integrity_checks);
    put_u64(out.data() + 24, integrity_rejections);
    put_u64(out.data() + 32, verifier_invocations);
    return out;
}

ServiceStats ServiceStats::decode(std::span<const std::uint8_t> bytes)
{
    if (bytes.size() != 40)
        throw Error(Errc::ProtocolError, "stats reply must be 40 bytes");
    ServiceStats s;
    s.copy_bytes = get_u64(bytes.data());
    s.round_trips = get_u64(bytes.data() + 8);
    s.integrity_checks = get_u64(bytes.data() + 16);
    s.integrity_rejections = get_u64(bytes.data() + 24);
    s.verifier_invocations = get_u64(bytes.data() + 32);
    return s;
}

std::uint64_t fold_checksum(std::uint64_t acc, std::span<const std::uint8_t> record) noexcept
{
    for (std::uint8_t b : record) {
        acc ^= b;
        acc *= 1099511628211ull;
    }
    acc ^= record.size();
    acc *= 1099511628211ull;
    return acc;
}

int connect_socket(const std::string& address)
{
    sockaddr_un addr{};
    addr.sun_family = AF_UNIX;
    if (address.empty() || address.size() >= sizeof addr.sun_path) {
        errno = ENAMETOOLONG;
        return -1;
    }
    std::memcpy(addr.sun_path, address.data(), address.size());
    if (address[0] == '@')
        addr.sun_path[0] = '\0';
    const auto len = static_cast<socklen_t>(offsetof(sockaddr_un, sun_path) + address.size());
    const int fd = ::socket(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0);
    if (fd < 0)
        return -1;
    if (::connect(fd, reinterpret_cast<const sockaddr*>(&addr), len) != 0) {
        const int err = errno;
        ::close(fd);
        errno = err;
        return -1;
    }
    return fd;
}

BoundaryChannel BoundaryChannel::connect(const std::string& address)
{
    const int fd = connect_socket(address);
    if (fd < 0)
        throw Error(Errc::ServiceUnavailable, "cannot connect to " + address + ": " + std::strerror(errno));
    return BoundaryChannel(fd);
}

BoundaryChannel::BoundaryChannel(BoundaryChannel&& other) noexcept
    : fd_(other.fd_), copy_bytes_(other.copy_bytes_), round_trips_(other.round_trips_),
      buffer_(std::move(other.buffer_))
{
    other.fd_ = -1;
}

BoundaryChannel& BoundaryChannel::operator=(BoundaryChannel&& other) noexcept
{
    if (this != &other) {
        close();
        fd_ = other.fd_;
        copy_bytes_ = other.copy_bytes_;
        round_trips_ = other.round_trips_;
        buffer_ = std::move(other.buffer_);
        other.fd_ = -1;
    }
    return *this;
}

BoundaryChannel::~BoundaryChannel() { close(); }

void BoundaryChannel::close() noexcept
{
    if (fd_ >= 0)
        ::close(fd_);
    fd_ = -1;
}

Response BoundaryChannel::call(Opcode op, std::uint64_t id, std::span<const std::uint8_t> payload)
{
    if (fd_ < 0)
        throw Error(Errc::ChannelClosed, "channel is closed");
    buffer_.resize(kRequestHeaderSize + payload.size());
    buffer_[0] = static_cast<std::uint8_t>(op);
    put_u64(buffer_.data() + 1, id);
    put_u32(buffer_.data() + 9, static_cast<std::uint32_t>(payload.size()));
    if (!payload.empty())
        std::memcpy(buffer_.data() + kRequestHeaderSize, payload.data(), payload.size());
    write_all(fd_, buffer_);

    std::uint8_t header[kResponseHeaderSize];
    if (!read_exact(fd_, header))
        throw Error(Errc::ChannelClosed, "service closed the channel");
    Response resp;
    resp.status = static_cast<Status>(header[0]);
    const std::uint32_t len = get_u32(header + 1);
    if (len > kMaxPayload)
        throw Error(Errc::ProtocolError, "oversized response");
    resp.payload.resize(len);
    if (len != 0 && !read_exact(fd_, resp.payload))
        throw Error(Errc::ChannelClosed, "service closed the channel");
    return resp;
}

Response BoundaryChannel::checked(Opcode op, std::uint64_t id, std::span<const std::uint8_t> payload)
{
    Response resp = call(op, id, payload);
    if (resp.status != Status::Ok) {
        std::string detail(resp.payload.begin(), resp.payload.end());
        throw Error(to_errc(resp.status), std::string(to_string(resp.status)) + (detail.empty() ? "" : ": " + detail));
    }
    return resp;
}

void BoundaryChannel::count_copy(std::size_t request, std::size_t response) noexcept
{
    copy_bytes_ += request + response;
    ++round_trips_;
}

AllocReply BoundaryChannel::alloc(shmem::TaskId task, std::span<const std::uint8_t> container)
{
    Response resp = checked(Opcode::Alloc, task, container);
    if (resp.payload.size() < 8)
        throw Error(Errc::ProtocolError, "alloc reply too short");
    return {get_u64(resp.payload.data()), std::string(resp.payload.begin() + 8, resp.payload.end())};
}

std::string BoundaryChannel::attach(shmem::TaskId task, std::uint64_t base_handle)
{
    std::uint8_t handle[8];
    put_u64(handle, base_handle);
    Response resp = checked(Opcode::Attach, task, handle);
    return std::string(resp.payload.begin(), resp.payload.end());
}

void BoundaryChannel::release(shmem::TaskId task)
{
    checked(Opcode::Release, task, {});
}

StatRecord BoundaryChannel::baseline_statfs(std::string_view path)
{
    if (path.empty() || path.size() > kMaxPathLen)
        throw Error(Errc::PathTooLong, "path length " + std::to_string(path.size()) + " outside [1, 4095]");
    const std::span<const std::uint8_t> bytes(reinterpret_cast<const std::uint8_t*>(path.data()), path.size());
    Response resp = checked(Opcode::BaselineStatfs, 0, bytes);
    count_copy(bytes.size(), resp.payload.size());
    return StatRecord::from_bytes(resp.payload);
}

void BoundaryChannel::doorbell_statfs(std::uint32_t thread_id)
{
    checked(Opcode::DoorbellStatfs, thread_id, {});
}

std::vector<std::uint8_t> BoundaryChannel::baseline_drain_one(std::span<const std::uint8_t> record)
{
    Response resp = checked(Opcode::RingDrainOne, 0, record);
    count_copy(record.size(), resp.payload.size());
    return std::move(resp.payload);
}

RingDrainReply BoundaryChannel::ring_doorbell(std::uint64_t expected_records)
{
    Response resp = checked(Opcode::RingDoorbell, expected_records, {});
    if (resp.payload.size() != 24)
        throw Error(Errc::ProtocolError, "ring doorbell reply must be 24 bytes");
    return {get_u64(resp.payload.data()), get_u64(resp.payload.data() + 8), get_u64(resp.payload.data() + 16)};
}

void BoundaryChannel::pss_flush(std::span<const pss::UpdateRecord> records)
{
    const std::vector<std::uint8_t> payload = pss::encode_batch(records);
    Response resp = checked(Opcode::PssFlush, 0, payload);
    count_copy(payload.size(), resp.payload.size());
}

ServiceStats BoundaryChannel::stats()
{
    return ServiceStats::decode(checked(Opcode::Stats, 0, {}).payload);
}

void BoundaryChannel::shutdown()
{
    checked(Opcode::Shutdown, 0, {});
}

} // namespace sbpf::transport
