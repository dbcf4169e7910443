#include "sbpf/session.hpp"

#include "sbpf/helpers.hpp"
#include "sbpf/integrity.hpp"

#include <cstring>

namespace sbpf::transport {

Session::Session(const std::string& address) : channel_(BoundaryChannel::connect(address)) {}

void Session::map(const std::string& name)
{
    mapping_.reset();
    mapping_.emplace(shmem::ShmObject::open(name, shmem::kSegmentSize));
}

LoadedLibrary Session::load(shmem::TaskId task, std::span<const std::uint8_t> container)
{
    const integrity::SignedLibrary lib = integrity::SignedLibrary::parse(container);
    AllocReply reply = channel_.alloc(task, container);
    if (!mapping_ || task_ != task || handle_ != reply.base_handle)
        map(reply.object_name);
    task_ = task;
    handle_ = reply.base_handle;
    verifier::VerifyResult verdict = verifier::verify(isa::decode_program(lib.payload), helpers::standard_signatures());
    if (auto* report = std::get_if<verifier::VerifierReport>(&verdict))
        throw integrity::VerificationError(std::move(*report));
    return {reply.base_handle, std::move(std::get<verifier::VerifiedProgram>(verdict))};
}

void Session::attach(shmem::TaskId task, std::uint64_t base_handle)
{
    const std::string name = channel_.attach(task, base_handle);
    map(name);
    task_ = task;
    handle_ = base_handle;
}

void Session::release()
{
    channel_.release(task_);
    mapping_.reset();
    handle_ = 0;
}

shmem::SegmentView Session::segment() const
{
    if (!mapping_)
        throw Error(Errc::NotFound, "session has no mapped segment");
    return {mapping_->bytes(), handle_};
}

StatfsClient::StatfsClient(Session& session, std::uint32_t thread_id, verifier::VerifiedProgram args_writer,
                           verifier::VerifiedProgram retval_reader, shmem::ThreadSlotLayout layout)
    : session_(session)
    , thread_id_(thread_id)
    , vm_(helpers::standard_helpers(), session.segment(), thread_id, layout)
    , writer_(std::move(args_writer))
    , reader_(std::move(retval_reader))
    , ret_(kStatRecordSize)
{
    layout.args_offset(thread_id);
}

StatRecord StatfsClient::sbpf_statfs(std::string_view path)
{
    args_.resize(8 + path.size());
    put_u64(args_.data(), path.size());
    std::memcpy(args_.data() + 8, path.data(), path.size());
    vm_.execute(writer_, {0, args_});
    session_.channel().doorbell_statfs(thread_id_);
    vm_.execute(reader_, {0, ret_});
    return StatRecord::from_bytes(ret_);
}

RingProducer::RingProducer(Session& session, verifier::VerifiedProgram pusher)
    : vm_(helpers::standard_helpers(), session.segment()), pusher_(std::move(pusher))
{
}

bool RingProducer::push(std::span<const std::uint8_t> record)
{
    ctx_.assign(record.begin(), record.end());
    return vm_.execute(pusher_, {0, ctx_}) == 0;
}

SbpfPss::SbpfPss(Session& session, verifier::VerifiedProgram predict_update, pss::ModelParams params)
    : vm_(helpers::standard_helpers(params), session.segment()), program_(std::move(predict_update)), ctx_(32)
{
}

int SbpfPss::predict_update(const pss::Features& f, int outcome)
{
    put_u64(ctx_.data(), f[0]);
    put_u64(ctx_.data() + 8, f[1]);
    put_u64(ctx_.data() + 16, f[2]);
    put_u64(ctx_.data() + 24, static_cast<std::uint64_t>(outcome));
    return static_cast<int>(vm_.execute(program_, {0, ctx_}));
}

BaselinePss::BaselinePss(Session& session, std::size_t batch_size, pss::ModelParams params)
    : session_(session), model_(session.segment().pss_region(), params)
{
    batch_.batch_size = batch_size;
    batch_.pending.reserve(batch_size);
}

int BaselinePss::predict_update(const pss::Features& f, int outcome)
{
    const int decision = model_.predict(f).decision;
    batch_.pending.push_back({f, static_cast<std::uint8_t>(outcome)});
    if (batch_.full())
        flush();
    return decision;
}

void BaselinePss::flush()
{
    if (batch_.pending.empty())
        return;
    session_.channel().pss_flush(batch_.pending);
    batch_.pending.clear();
    ++flushes_;
}

} // namespace sbpf::transport
