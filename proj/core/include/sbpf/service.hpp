#pragma once

#include "sbpf/channel.hpp"
#include "sbpf/integrity.hpp"
#include "sbpf/pss.hpp"
#include "sbpf/shmem.hpp"

#include <atomic>
#include <chrono>
#include <cstdint>
#include <list>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <sys/types.h>

/// The kernel-side emulation: segment manager, library load gate and the
/// request handlers behind the boundary channel.
namespace sbpf::transport {

struct ServiceConfig {
    std::string address;
    integrity::Key key{};
    std::uint64_t rng_seed = 0;
    std::string session_id;
    shmem::ThreadSlotLayout layout;
    pss::ModelParams pss;
    std::chrono::milliseconds doorbell_timeout{10'000};
};

/// A fresh abstract-namespace socket address.
std::string unique_address();

/// Direct view of a thread's args memory; no bytes are copied. Throws
/// InvalidThread or LengthExceedsSlot.
std::span<std::uint8_t> sbpf_copy_from_user(const shmem::SegmentView& segment, const shmem::ThreadSlotLayout& layout,
                                            std::uint64_t thread_id, std::size_t len);

/// Places `bytes` at the thread's return value memory. Throws InvalidThread
/// or LengthExceedsSlot.
void sbpf_copy_to_user(const shmem::SegmentView& segment, const shmem::ThreadSlotLayout& layout,
                       std::uint64_t thread_id, std::span<const std::uint8_t> bytes);

class Service {
public:
    /// Binds and listens. Throws ServiceUnavailable.
    explicit Service(ServiceConfig config);
    ~Service();

    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    /// Accept loop; returns after stop() or a Shutdown request.
    void run();
    void stop() noexcept;

    ServiceStats stats() const;
    integrity::LoadCounters load_counters() const { return loader_.counters(); }
    const std::string& address() const noexcept { return config_.address; }
    shmem::SegmentManager& manager() noexcept { return manager_; }

private:
    struct Connection;

    void serve(Connection& conn);
    Response handle(Connection& conn, const Request& req);
    Response on_alloc(Connection& conn, const Request& req);
    Response on_attach(Connection& conn, const Request& req);
    Response on_release(Connection& conn, const Request& req);
    Response on_baseline_statfs(const Request& req);
    Response on_doorbell_statfs(Connection& conn, const Request& req);
    Response on_drain_one(Connection& conn, const Request& req);
    Response on_ring_doorbell(Connection& conn, const Request& req);
    Response on_pss_flush(Connection& conn, const Request& req);
    std::shared_ptr<shmem::SharedSegment> bound_segment(const Connection& conn) const;
    void reap_finished();

    ServiceConfig config_;
    shmem::SegmentManager manager_;
    integrity::LibraryLoader loader_;
    int listen_fd_ = -1;
    std::atomic<bool> stopping_{false};

    std::mutex conns_mutex_;
    std::list<std::unique_ptr<Connection>> conns_;

    std::vector<std::mutex> slot_mutex_;
    std::mutex pss_mutex_;
    std::mutex ring_mutex_;

    std::atomic<std::uint64_t> copy_bytes_{0};
    std::atomic<std::uint64_t> round_trips_{0};
};

/// Runs a Service in a forked child process.
class ServiceProcess {
public:
    /// Forks, waits until the child listens. Throws ServiceUnavailable.
    explicit ServiceProcess(ServiceConfig config);
    ~ServiceProcess();

    ServiceProcess(const ServiceProcess&) = delete;
    ServiceProcess& operator=(const ServiceProcess&) = delete;

    const std::string& address() const noexcept { return address_; }
    pid_t pid() const noexcept { return pid_; }

    /// Asks the service to shut down and reaps it. Returns the exit status.
    int stop();
    /// SIGKILLs the child and reaps it.
    void kill() noexcept;

private:
    std::string address_;
    pid_t pid_ = -1;
};

} // namespace sbpf::transport
