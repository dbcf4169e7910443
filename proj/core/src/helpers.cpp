#include "sbpf/helpers.hpp"

#include "sbpf/ring.hpp"

#include <cstring>

namespace sbpf::helpers {

using vm::Args;
using vm::HelperEnv;

namespace {

void copy(std::span<std::uint8_t> to, std::span<const std::uint8_t> from)
{
    std::memmove(to.data(), from.data(), from.size());
}

std::span<std::uint8_t> slot_window(const HelperEnv& env, bool args, std::uint64_t slot_offset,
                                    std::uint64_t len)
{
    const shmem::ThreadSlotLayout& layout = *env.layout;
    const std::size_t base = args ? layout.args_offset(env.thread_id) : layout.ret_offset(env.thread_id);
    const std::size_t size = args ? layout.args_size : layout.ret_size;
    if (slot_offset > size || len > size - slot_offset)
        throw Error(Errc::HelperFault, std::string(args ? "args" : "retval") + " access [" + std::to_string(slot_offset)
                                           + ", +" + std::to_string(len) + ") outside the " + std::to_string(size)
                                           + "-byte slot of thread " + std::to_string(env.thread_id));
    return env.segment_window(base + slot_offset, len);
}

pss::Features features_of(const Args& a) { return {a[0], a[1], a[2]}; }

} // namespace

vm::HelperTable standard_helpers(pss::ModelParams pss_params)
{
    vm::HelperTable t;
    t.register_helper(kShmReadU64, "shm_read_u64", 1, [](HelperEnv& env, const Args& a) -> std::uint64_t {
        std::uint64_t v;
        std::memcpy(&v, env.segment_window(a[0], 8).data(), 8);
        return v;
    });
    t.register_helper(kShmWriteU64, "shm_write_u64", 2, [](HelperEnv& env, const Args& a) -> std::uint64_t {
        std::memcpy(env.segment_window(a[0], 8).data(), &a[1], 8);
        return 0;
    });
    t.register_helper(kShmReadVec, "shm_read_vec", 3, [](HelperEnv& env, const Args& a) -> std::uint64_t {
        auto to = env.stack_window(a[1], a[2]);
        copy(to, env.segment_window(a[0], a[2]));
        return a[2];
    });
    t.register_helper(kShmWriteVec, "shm_write_vec", 3, [](HelperEnv& env, const Args& a) -> std::uint64_t {
        auto from = env.stack_window(a[0], a[2]);
        copy(env.segment_window(a[1], a[2]), from);
        return a[2];
    });
    t.register_helper(kRingPush, "ring_push", 2, [](HelperEnv& env, const Args& a) -> std::uint64_t {
        auto payload = env.stack_window(a[0], a[1]);
        ring::SpscRing ring(env.segment_window(shmem::kRingRegionOffset, shmem::kRingRegionSize));
        if (payload.empty() || payload.size() > ring.max_record_len())
            throw Error(Errc::HelperFault, "ring record length " + std::to_string(a[1]) + " out of range");
        return ring.push(payload) == ring::PushResult::Ok ? 0 : 1;
    });
    t.register_helper(kPssPredict, "pss_predict", 3, [pss_params](HelperEnv& env, const Args& a) -> std::uint64_t {
        pss::PerceptronModel model(env.segment_window(shmem::kPssRegionOffset, shmem::kPssRegionSize), pss_params);
        return static_cast<std::uint64_t>(model.predict(features_of(a)).decision);
    });
    t.register_helper(kPssUpdate, "pss_update", 4, [pss_params](HelperEnv& env, const Args& a) -> std::uint64_t {
        if (a[3] > 1)
            throw Error(Errc::HelperFault, "pss outcome must be 0 or 1, got " + std::to_string(a[3]));
        pss::PerceptronModel model(env.segment_window(shmem::kPssRegionOffset, shmem::kPssRegionSize), pss_params);
        return model.update(features_of(a), static_cast<int>(a[3])) ? 1 : 0;
    });
    t.register_helper(kArgsWrite, "args_write", 3, [](HelperEnv& env, const Args& a) -> std::uint64_t {
        auto from = env.stack_window(a[0], a[1]);
        copy(slot_window(env, true, a[2], a[1]), from);
        return a[1];
    });
    t.register_helper(kRetvalRead, "retval_read", 3, [](HelperEnv& env, const Args& a) -> std::uint64_t {
        auto to = env.stack_window(a[0], a[1]);
        copy(to, slot_window(env, false, a[2], a[1]));
        return a[1];
    });
    t.register_helper(kCtxRead, "ctx_read", 3, [](HelperEnv& env, const Args& a) -> std::uint64_t {
        auto to = env.stack_window(a[1], a[2]);
        copy(to, env.context_window(a[0], a[2]));
        return a[2];
    });
    t.register_helper(kCtxWrite, "ctx_write", 3, [](HelperEnv& env, const Args& a) -> std::uint64_t {
        auto from = env.stack_window(a[0], a[2]);
        copy(env.context_window(a[1], a[2]), from);
        return a[2];
    });
    return t;
}

verifier::HelperSet standard_signatures()
{
    return standard_helpers().signatures();
}

} // namespace sbpf::helpers
