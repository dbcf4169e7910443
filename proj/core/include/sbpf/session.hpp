#pragma once

#include "sbpf/channel.hpp"
#include "sbpf/pss.hpp"
#include "sbpf/shmem.hpp"
#include "sbpf/verifier.hpp"
#include "sbpf/vm.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

/// User side: a channel to the service plus the local mapping of the task's
/// segment, and the per-thread clients built on top of it.
namespace sbpf::transport {

struct LoadedLibrary {
    std::uint64_t base_handle;
    verifier::VerifiedProgram program;
};

class Session {
public:
    /// Throws ServiceUnavailable.
    explicit Session(const std::string& address);

    /// Sends the signed container; on success maps the segment and verifies
    /// the payload locally so it can be executed here.
    LoadedLibrary load(shmem::TaskId task, std::span<const std::uint8_t> container);

    /// Binds this session to an already live segment.
    void attach(shmem::TaskId task, std::uint64_t base_handle);

    void release();

    BoundaryChannel& channel() noexcept { return channel_; }
    bool mapped() const noexcept { return mapping_.has_value(); }
    /// Throws NotFound before load/attach.
    shmem::SegmentView segment() const;
    shmem::TaskId task() const noexcept { return task_; }
    std::uint64_t base_handle() const noexcept { return handle_; }

private:
    void map(const std::string& name);

    BoundaryChannel channel_;
    std::optional<shmem::ShmObject> mapping_;
    shmem::TaskId task_ = 0;
    std::uint64_t handle_ = 0;
};

/// Zero-copy statfs for one user thread.
class StatfsClient {
public:
    StatfsClient(Session& session, std::uint32_t thread_id, verifier::VerifiedProgram args_writer,
                 verifier::VerifiedProgram retval_reader, shmem::ThreadSlotLayout layout = {});

    /// Throws HelperFault when the path does not fit the args memory,
    /// InvalidThread for a bad thread id, ChannelClosed.
    StatRecord sbpf_statfs(std::string_view path);

private:
    Session& session_;
    std::uint32_t thread_id_;
    vm::Vm vm_;
    verifier::VerifiedProgram writer_;
    verifier::VerifiedProgram reader_;
    std::vector<std::uint8_t> args_;
    std::vector<std::uint8_t> ret_;
};

/// SPSC producer running the push wrapper program in the VM.
class RingProducer {
public:
    RingProducer(Session& session, verifier::VerifiedProgram pusher);

    /// True when the record was queued, false when the ring was full.
    bool push(std::span<const std::uint8_t> record);

private:
    vm::Vm vm_;
    verifier::VerifiedProgram pusher_;
    std::vector<std::uint8_t> ctx_;
};

/// Predict-and-update through the VM, in place in shared memory.
class SbpfPss {
public:
    SbpfPss(Session& session, verifier::VerifiedProgram predict_update, pss::ModelParams params = {});

    int predict_update(const pss::Features& f, int outcome);

private:
    vm::Vm vm_;
    verifier::VerifiedProgram program_;
    std::vector<std::uint8_t> ctx_;
};

/// Direct shared-model reads with batched updates over the channel.
class BaselinePss {
public:
    BaselinePss(Session& session, std::size_t batch_size = pss::kDefaultBatchSize, pss::ModelParams params = {});

    int predict_update(const pss::Features& f, int outcome);
    /// Sends whatever is pending.
    void flush();

    const pss::UpdateBatch& batch() const noexcept { return batch_; }
    std::uint64_t flushes() const noexcept { return flushes_; }

private:
    Session& session_;
    pss::PerceptronModel model_;
    pss::UpdateBatch batch_;
    std::uint64_t flushes_ = 0;
};

} // namespace sbpf::transport
