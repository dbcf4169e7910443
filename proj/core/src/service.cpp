#include "sbpf/service.hpp"

#include "sbpf/helpers.hpp"
#include "sbpf/ring.hpp"

#include <cerrno>
#include <csignal>
#include <fcntl.h>
#include <cstring>
#include <iostream>
#include <set>

#include <sched.h>
#include <sys/socket.h>
#include <sys/un.h>
#include <sys/wait.h>
#include <unistd.h>

namespace sbpf::transport {

namespace {

Response ok(std::vector<std::uint8_t> payload = {})
{
    return {Status::Ok, std::move(payload)};
}

Response fail(Status status, std::string_view message)
{
    return {status, std::vector<std::uint8_t>(message.begin(), message.end())};
}

std::vector<std::uint8_t> u64s(std::initializer_list<std::uint64_t> values)
{
    std::vector<std::uint8_t> out(values.size() * 8);
    std::size_t i = 0;
    for (std::uint64_t v : values)
        put_u64(out.data() + 8 * i++, v);
    return out;
}

} // namespace

struct Service::Connection {
    int fd = -1;
    std::thread thread;
    std::atomic<bool> done{false};
    std::optional<shmem::TaskId> task;
    std::set<shmem::TaskId> owned;
    std::uint64_t drain_checksum = kChecksumSeed;
};

std::string unique_address()
{
    return "@sbpf-" + shmem::random_session_id();
}

std::span<std::uint8_t> sbpf_copy_from_user(const shmem::SegmentView& segment, const shmem::ThreadSlotLayout& layout,
                                            std::uint64_t thread_id, std::size_t len)
{
    const std::size_t offset = layout.args_offset(thread_id);
    if (len > layout.args_size)
        throw Error(Errc::LengthExceedsSlot, std::to_string(len) + " bytes exceed the "
                                                 + std::to_string(layout.args_size) + "-byte args memory");
    return segment.bytes.subspan(offset, len);
}

void sbpf_copy_to_user(const shmem::SegmentView& segment, const shmem::ThreadSlotLayout& layout,
                       std::uint64_t thread_id, std::span<const std::uint8_t> bytes)
{
    const std::size_t offset = layout.ret_offset(thread_id);
    if (bytes.size() > layout.ret_size)
        throw Error(Errc::LengthExceedsSlot, std::to_string(bytes.size()) + " bytes exceed the "
                                                 + std::to_string(layout.ret_size) + "-byte return value memory");
    std::memcpy(segment.bytes.data() + offset, bytes.data(), bytes.size());
}

Service::Service(ServiceConfig config)
    : config_(std::move(config))
    , manager_(config_.session_id.empty() ? shmem::random_session_id() : config_.session_id,
               config_.rng_seed ? config_.rng_seed : std::random_device{}())
    , loader_(config_.key, manager_, helpers::standard_signatures())
    , slot_mutex_(config_.layout.max_threads)
{
    if (config_.layout.pool_end() > shmem::kSlotPoolOffset + shmem::kSlotPoolSize)
        throw std::invalid_argument("thread slot layout does not fit the slot pool");
    if (config_.address.empty())
        config_.address = unique_address();

    sockaddr_un addr{};
    addr.sun_family = AF_UNIX;
    if (config_.address.size() >= sizeof addr.sun_path)
        throw Error(Errc::ServiceUnavailable, "socket address too long");
    std::memcpy(addr.sun_path, config_.address.data(), config_.address.size());
    if (config_.address[0] == '@')
        addr.sun_path[0] = '\0';
    else
        ::unlink(config_.address.c_str());
    const auto len = static_cast<socklen_t>(offsetof(sockaddr_un, sun_path) + config_.address.size());

    listen_fd_ = ::socket(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0);
    if (listen_fd_ < 0 || ::bind(listen_fd_, reinterpret_cast<const sockaddr*>(&addr), len) != 0
        || ::listen(listen_fd_, 128) != 0) {
        const std::string why = std::strerror(errno);
        if (listen_fd_ >= 0)
            ::close(listen_fd_);
        throw Error(Errc::ServiceUnavailable, "cannot listen on " + config_.address + ": " + why);
    }
}

Service::~Service()
{
    stop();
    std::list<std::unique_ptr<Connection>> conns;
    {
        std::lock_guard lock(conns_mutex_);
        conns.swap(conns_);
    }
    for (auto& conn : conns) {
        ::shutdown(conn->fd, SHUT_RDWR);
        if (conn->thread.joinable())
            conn->thread.join();
        ::close(conn->fd);
    }
    if (listen_fd_ >= 0)
        ::close(listen_fd_);
    if (!config_.address.empty() && config_.address[0] != '@')
        ::unlink(config_.address.c_str());
}

void Service::stop() noexcept
{
    if (stopping_.exchange(true))
        return;
    if (listen_fd_ >= 0)
        ::shutdown(listen_fd_, SHUT_RDWR);
    std::lock_guard lock(conns_mutex_);
    for (auto& conn : conns_)
        ::shutdown(conn->fd, SHUT_RDWR);
}

void Service::reap_finished()
{
    std::lock_guard lock(conns_mutex_);
    for (auto it = conns_.begin(); it != conns_.end();) {
        if ((*it)->done.load()) {
            (*it)->thread.join();
            ::close((*it)->fd);
            it = conns_.erase(it);
        } else {
            ++it;
        }
    }
}

void Service::run()
{
    while (!stopping_.load()) {
        const int fd = ::accept4(listen_fd_, nullptr, nullptr, SOCK_CLOEXEC);
        if (fd < 0) {
            if (errno == EINTR || errno == ECONNABORTED)
                continue;
            break;
        }
        reap_finished();
        auto conn = std::make_unique<Connection>();
        conn->fd = fd;
        Connection& ref = *conn;
        std::lock_guard lock(conns_mutex_);
        if (stopping_.load()) {
            ::close(fd);
            break;
        }
        conns_.push_back(std::move(conn));
        ref.thread = std::thread([this, &ref] { serve(ref); });
    }
}

void Service::serve(Connection& conn)
{
    std::vector<std::uint8_t> out;
    try {
        while (true) {
            std::uint8_t header[kRequestHeaderSize];
            if (!read_exact(conn.fd, header))
                break;
            Request req;
            req.op = static_cast<Opcode>(header[0]);
            req.id = get_u64(header + 1);
            const std::uint32_t len = get_u32(header + 9);
            if (len > kMaxPayload)
                break;
            req.payload.resize(len);
            if (len != 0 && !read_exact(conn.fd, req.payload))
                break;

            Response resp;
            try {
                resp = handle(conn, req);
            } catch (const Error& e) {
                resp = fail(to_status(e.code()), e.what());
            } catch (const std::exception& e) {
                resp = fail(Status::BadRequest, e.what());
            }
            out.resize(kResponseHeaderSize + resp.payload.size());
            out[0] = static_cast<std::uint8_t>(resp.status);
            put_u32(out.data() + 1, static_cast<std::uint32_t>(resp.payload.size()));
            if (!resp.payload.empty())
                std::memcpy(out.data() + kResponseHeaderSize, resp.payload.data(), resp.payload.size());
            write_all(conn.fd, out);
            if (req.op == Opcode::Shutdown) {
                stop();
                break;
            }
        }
    } catch (const Error&) {
        // peer vanished mid-message
    }
    for (shmem::TaskId task : conn.owned) {
        try {
            manager_.release(task);
        } catch (const Error&) {
        }
    }
    conn.done.store(true);
}

Response Service::handle(Connection& conn, const Request& req)
{
    switch (req.op) {
    case Opcode::Alloc: return on_alloc(conn, req);
    case Opcode::Release: return on_release(conn, req);
    case Opcode::BaselineStatfs: return on_baseline_statfs(req);
    case Opcode::DoorbellStatfs: return on_doorbell_statfs(conn, req);
    case Opcode::Shutdown: return ok();
    case Opcode::Stats: return ok(stats().encode());
    case Opcode::Attach: return on_attach(conn, req);
    case Opcode::RingDrainOne: return on_drain_one(conn, req);
    case Opcode::PssFlush: return on_pss_flush(conn, req);
    case Opcode::RingDoorbell: return on_ring_doorbell(conn, req);
    }
    return fail(Status::BadRequest, "unknown opcode " + std::to_string(static_cast<int>(req.op)));
}

Response Service::on_alloc(Connection& conn, const Request& req)
{
    try {
        integrity::LoadResult result = loader_.load_library(req.payload, req.id);
        if (!result.reused_segment)
            conn.owned.insert(req.id);
        conn.task = req.id;
        std::vector<std::uint8_t> payload(8);
        put_u64(payload.data(), result.base_handle);
        const std::string& name = result.segment->backing.name();
        payload.insert(payload.end(), name.begin(), name.end());
        return ok(std::move(payload));
    } catch (const integrity::VerificationError& e) {
        return fail(Status::VerificationRejected, e.report().format());
    }
}

Response Service::on_attach(Connection& conn, const Request& req)
{
    if (req.payload.size() != 8)
        return fail(Status::BadRequest, "attach expects an 8-byte handle");
    auto segment = manager_.find(req.id);
    if (!segment || segment->base_handle != get_u64(req.payload.data()))
        return fail(Status::NotFound, "no segment for that task and handle");
    conn.task = req.id;
    const std::string& name = segment->backing.name();
    return ok(std::vector<std::uint8_t>(name.begin(), name.end()));
}

Response Service::on_release(Connection& conn, const Request& req)
{
    manager_.release(req.id);
    conn.owned.erase(req.id);
    if (conn.task == req.id)
        conn.task.reset();
    return ok();
}

std::shared_ptr<shmem::SharedSegment> Service::bound_segment(const Connection& conn) const
{
    if (!conn.task)
        throw Error(Errc::NotFound, "connection is not bound to a task");
    return manager_.lookup(*conn.task);
}

Response Service::on_baseline_statfs(const Request& req)
{
    if (req.payload.empty() || req.payload.size() > kMaxPathLen)
        return fail(Status::PathTooLong, "path length " + std::to_string(req.payload.size()) + " outside [1, 4095]");
    const auto record = compute_stat(req.payload).to_bytes();
    copy_bytes_ += req.payload.size() + record.size();
    ++round_trips_;
    return ok(std::vector<std::uint8_t>(record.begin(), record.end()));
}

Response Service::on_doorbell_statfs(Connection& conn, const Request& req)
{
    auto segment = bound_segment(conn);
    const shmem::ThreadSlotLayout& layout = config_.layout;
    if (req.id >= layout.max_threads)
        return fail(Status::InvalidThread, "thread " + std::to_string(req.id) + " >= max_threads");
    const shmem::SegmentView view = segment->view();
    std::lock_guard lock(slot_mutex_[req.id]);
    const std::uint64_t len = get_u64(sbpf_copy_from_user(view, layout, req.id, 8).data());
    if (len > layout.args_size - 8)
        return fail(Status::LengthExceedsSlot, "path length " + std::to_string(len) + " exceeds the args memory");
    const auto path = sbpf_copy_from_user(view, layout, req.id, 8 + len).subspan(8);
    sbpf_copy_to_user(view, layout, req.id, compute_stat(path).to_bytes());
    return ok();
}

Response Service::on_drain_one(Connection& conn, const Request& req)
{
    conn.drain_checksum = fold_checksum(conn.drain_checksum, req.payload);
    copy_bytes_ += 2 * req.payload.size();
    ++round_trips_;
    return ok(req.payload);
}

Response Service::on_ring_doorbell(Connection& conn, const Request& req)
{
    auto segment = bound_segment(conn);
    std::lock_guard lock(ring_mutex_);
    ring::SpscRing ring(segment->view().ring_region());
    const auto start = std::chrono::steady_clock::now();
    const auto deadline = start + config_.doorbell_timeout;
    std::uint64_t taken = 0;
    std::uint64_t checksum = kChecksumSeed;
    unsigned idle = 0;
    while (taken < req.id) {
        const std::size_t n = ring.consume(req.id - taken, [&](std::span<const std::uint8_t> record) {
            checksum = fold_checksum(checksum, record);
        });
        taken += n;
        if (n != 0) {
            idle = 0;
            continue;
        }
        if (++idle < 1024)
            continue;
        if (std::chrono::steady_clock::now() > deadline)
            return fail(Status::Timeout, "ring doorbell timed out after " + std::to_string(taken) + " records");
        ::sched_yield();
    }
    const auto ns = std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - start);
    return ok(u64s({taken, checksum, static_cast<std::uint64_t>(ns.count())}));
}

Response Service::on_pss_flush(Connection& conn, const Request& req)
{
    auto segment = bound_segment(conn);
    const std::vector<pss::UpdateRecord> records = pss::decode_batch(req.payload);
    {
        std::lock_guard lock(pss_mutex_);
        pss::PerceptronModel model(segment->view().pss_region(), config_.pss);
        for (const pss::UpdateRecord& r : records)
            model.update(r.features, r.outcome);
    }
    copy_bytes_ += req.payload.size();
    ++round_trips_;
    return ok();
}

ServiceStats Service::stats() const
{
    const integrity::LoadCounters c = loader_.counters();
    return {copy_bytes_.load(), round_trips_.load(), c.integrity_checks, c.integrity_rejections,
            c.verifier_invocations};
}

ServiceProcess::ServiceProcess(ServiceConfig config)
{
    if (config.address.empty())
        config.address = unique_address();
    address_ = config.address;
    int ready[2];
    if (::pipe2(ready, O_CLOEXEC) != 0)
        throw Error(Errc::ServiceUnavailable, std::string("pipe: ") + std::strerror(errno));
    std::cout.flush();
    std::cerr.flush();
    pid_ = ::fork();
    if (pid_ < 0) {
        ::close(ready[0]);
        ::close(ready[1]);
        throw Error(Errc::ServiceUnavailable, std::string("fork: ") + std::strerror(errno));
    }
    if (pid_ == 0) {
        ::close(ready[0]);
        int code = 0;
        try {
            Service service(std::move(config));
            const char byte = 1;
            if (::write(ready[1], &byte, 1) != 1)
                ::_exit(3);
            ::close(ready[1]);
            service.run();
        } catch (const std::exception& e) {
            std::cerr << "sbpf service: " << e.what() << '\n';
            code = 2;
        }
        ::_exit(code);
    }
    ::close(ready[1]);
    char byte = 0;
    ssize_t n;
    do {
        n = ::read(ready[0], &byte, 1);
    } while (n < 0 && errno == EINTR);
    ::close(ready[0]);
    if (n != 1) {
        kill();
        throw Error(Errc::ServiceUnavailable, "service process failed to start");
    }
}

ServiceProcess::~ServiceProcess()
{
    if (pid_ > 0)
        stop();
}

int ServiceProcess::stop()
{
    if (pid_ <= 0)
        return -1;
    int status = 0;
    try {
        BoundaryChannel::connect(address_).shutdown();
    } catch (const Error&) {
        // Already shutting down, or wedged: give it a moment to exit on its own.
        const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(2);
        while (std::chrono::steady_clock::now() < deadline) {
            if (::waitpid(pid_, &status, WNOHANG) == pid_) {
                pid_ = -1;
                return status;
            }
            std::this_thread::sleep_for(std::chrono::milliseconds(5));
        }
        ::kill(pid_, SIGTERM);
    }
    while (::waitpid(pid_, &status, 0) < 0 && errno == EINTR) {
    }
    pid_ = -1;
    return status;
}

void ServiceProcess::kill() noexcept
{
    if (pid_ <= 0)
        return;
    ::kill(pid_, SIGKILL);
    int status = 0;
    while (::waitpid(pid_, &status, 0) < 0 && errno == EINTR) {
    }
    pid_ = -1;
}

} // namespace sbpf::transport
