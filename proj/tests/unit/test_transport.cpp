#include "test_support.hpp"

#include "sbpf/bench.hpp"
#include "sbpf/error.hpp"
#include "sbpf/programs.hpp"
#include "sbpf/ring.hpp"
#include "sbpf/session.hpp"

#include <gtest/gtest.h>

#include <cstring>
#include <random>

using namespace sbpf;
using namespace sbpf::transport;
using sbpf::test::must_verify;
using sbpf::test::ServiceHarness;
using sbpf::test::signed_container;

namespace {

Errc error_of(const std::function<void()>& fn)
{
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error";
    return Errc::IoError;
}

std::vector<std::uint8_t> u32_record(std::uint32_t v)
{
    std::vector<std::uint8_t> r(4);
    put_u32(r.data(), v);
    return r;
}

class TransportTest : public ::testing::Test {
protected:
    ServiceHarness service;

    LoadedLibrary load(Session& s, const isa::Program& p, shmem::TaskId task = 1)
    {
        return s.load(task, signed_container(p, service.key()));
    }

    StatfsClient statfs_client(Session& s, std::uint32_t thread = 0)
    {
        auto writer = load(s, programs::statfs_args_writer()).program;
        return StatfsClient(s, thread, std::move(writer), must_verify(programs::statfs_retval_reader()));
    }
};

} // namespace

TEST_F(TransportTest, BaselineStatfsRoot)
{
    Session s(service.address());
    const StatRecord r = s.channel().baseline_statfs("/");
    EXPECT_EQ(r.path_len, 1u);
    EXPECT_EQ(r.path_hash, 0xaf63a24c860189feull);
    EXPECT_EQ(r.block_size, 4096u);
    EXPECT_EQ(r, compute_stat("/"));
    EXPECT_EQ(s.channel().copy_bytes(), 1u + 64u);
    EXPECT_EQ(s.channel().round_trips(), 1u);
}

TEST_F(TransportTest, BaselineStatfsPathLimits)
{
    Session s(service.address());
    EXPECT_EQ(error_of([&] { s.channel().baseline_statfs(std::string(4096, 'a')); }), Errc::PathTooLong);
    EXPECT_EQ(error_of([&] { s.channel().baseline_statfs(""); }), Errc::PathTooLong);
    const std::string longest = "/" + std::string(4094, 'x');
    EXPECT_EQ(s.channel().baseline_statfs(longest), compute_stat(longest));
}

TEST_F(TransportTest, SbpfStatfsMatchesBaselineWithoutCopies)
{
    Session s(service.address());
    StatfsClient client = statfs_client(s);
    std::uint64_t state = 99;
    for (std::size_t len : {1u, 2u, 9u, 100u, 511u, 512u, 513u, 2000u, 4087u}) {
        const std::string path = bench::random_path(state, len);
        const auto before = s.channel().stats();
        const StatRecord zero_copy = client.sbpf_statfs(path);
        const auto after = s.channel().stats();
        EXPECT_EQ(after.copy_bytes, before.copy_bytes) << len;
        EXPECT_EQ(zero_copy, s.channel().baseline_statfs(path)) << len;
    }
}

TEST_F(TransportTest, SbpfStatfsRejectsOversizedPath)
{
    Session s(service.address());
    StatfsClient client = statfs_client(s);
    EXPECT_EQ(error_of([&] { client.sbpf_statfs(std::string(4089, 'a')); }), Errc::HelperFault);
    EXPECT_EQ(client.sbpf_statfs("/ok"), compute_stat("/ok"));
}

TEST_F(TransportTest, SbpfStatfsInvalidThread)
{
    Session s(service.address());
    auto writer = load(s, programs::statfs_args_writer()).program;
    EXPECT_EQ(error_of([&] {
                  StatfsClient(s, 64, writer, must_verify(programs::statfs_retval_reader()));
              }),
              Errc::InvalidThread);
    EXPECT_EQ(error_of([&] { s.channel().doorbell_statfs(64); }), Errc::InvalidThread);
}

TEST_F(TransportTest, DoorbellNeedsBoundTask)
{
    Session s(service.address());
    EXPECT_EQ(error_of([&] { s.channel().doorbell_statfs(0); }), Errc::NotFound);
}

TEST_F(TransportTest, ThreadsUseSeparateSlots)
{
    Session s(service.address());
    StatfsClient a = statfs_client(s, 0);
    auto writer = load(s, programs::statfs_args_writer()).program;
    StatfsClient b(s, 5, writer, must_verify(programs::statfs_retval_reader()));
    EXPECT_EQ(a.sbpf_statfs("/a/first"), compute_stat("/a/first"));
    EXPECT_EQ(b.sbpf_statfs("/b"), compute_stat("/b"));
    EXPECT_EQ(a.sbpf_statfs("/a"), compute_stat("/a"));
}

TEST(CopyUser, FromUserIsAView)
{
    shmem::SegmentManager manager("copy-user-view", 1);
    auto seg = manager.allocate(1);
    const shmem::SegmentView view = seg->view();
    const shmem::ThreadSlotLayout layout;
    const auto args = sbpf_copy_from_user(view, layout, 3, 16);
    EXPECT_EQ(args.data(), view.bytes.data() + 24576);
    EXPECT_EQ(args.size(), 16u);
    view.bytes[24576] = 0x5a;
    EXPECT_EQ(args[0], 0x5a);
}

TEST(CopyUser, ToUserWritesReturnMemory)
{
    shmem::SegmentManager manager("copy-user-ret", 1);
    auto seg = manager.allocate(1);
    const shmem::SegmentView view = seg->view();
    const shmem::ThreadSlotLayout layout;
    const std::vector<std::uint8_t> bytes{1, 2, 3, 4};
    sbpf_copy_to_user(view, layout, 3, bytes);
    EXPECT_TRUE(std::equal(bytes.begin(), bytes.end(), view.bytes.begin() + 28672));
    sbpf_copy_to_user(view, layout, 3, std::vector<std::uint8_t>{9, 9});
    EXPECT_EQ(view.bytes[28672], 9);
    EXPECT_EQ(view.bytes[28674], 3);
}

TEST(CopyUser, Limits)
{
    shmem::SegmentManager manager("copy-user-limits", 1);
    auto seg = manager.allocate(1);
    const shmem::SegmentView view = seg->view();
    const shmem::ThreadSlotLayout layout;
    EXPECT_EQ(sbpf_copy_from_user(view, layout, 63, 4096).size(), 4096u);
    EXPECT_EQ(error_of([&] { sbpf_copy_from_user(view, layout, 0, 4097); }), Errc::LengthExceedsSlot);
    EXPECT_EQ(error_of([&] { sbpf_copy_from_user(view, layout, 64, 1); }), Errc::InvalidThread);
    const std::vector<std::uint8_t> big(4097);
    EXPECT_EQ(error_of([&] { sbpf_copy_to_user(view, layout, 0, big); }), Errc::LengthExceedsSlot);
    EXPECT_EQ(error_of([&] { sbpf_copy_to_user(view, layout, 64, {}); }), Errc::InvalidThread);
}

TEST_F(TransportTest, DrainOneEchoesAndCounts)
{
    Session s(service.address());
    const auto before = s.channel().stats();
    for (std::uint32_t i = 0; i < 32; ++i) {
        const auto r = u32_record(i * 7919);
        EXPECT_EQ(s.channel().baseline_drain_one(r), r);
    }
    const auto after = s.channel().stats();
    EXPECT_EQ(after.round_trips - before.round_trips, 32u);
    EXPECT_EQ(after.copy_bytes - before.copy_bytes, 32u * 8u);
    EXPECT_EQ(s.channel().round_trips(), 32u);
}

TEST_F(TransportTest, RingDoorbellDrainsInOrder)
{
    Session s(service.address());
    RingProducer producer(s, load(s, programs::ring_pusher()).program);
    std::uint64_t checksum = kChecksumSeed;
    for (std::uint32_t i = 0; i < 32; ++i) {
        const auto r = u32_record(i + 1000);
        checksum = fold_checksum(checksum, r);
        ASSERT_TRUE(producer.push(r));
    }
    const RingDrainReply reply = s.channel().ring_doorbell(32);
    EXPECT_EQ(reply.count, 32u);
    EXPECT_EQ(reply.checksum, checksum);
    EXPECT_EQ(s.channel().round_trips(), 0u);
    EXPECT_EQ(s.channel().copy_bytes(), 0u);
}

TEST_F(TransportTest, RingPushReportsFull)
{
    Session s(service.address());
    RingProducer producer(s, load(s, programs::ring_pusher()).program);
    const std::vector<std::uint8_t> record(504, 0xab);
    std::size_t pushed = 0;
    while (producer.push(record))
        ++pushed;
    EXPECT_EQ(pushed, ring::capacity_for(shmem::kRingRegionSize) / 512);
    EXPECT_EQ(s.channel().ring_doorbell(pushed).count, pushed);
    EXPECT_TRUE(producer.push(record));
}

TEST_F(TransportTest, ChannelClosedAfterShutdown)
{
    Session s(service.address());
    s.channel().shutdown();
    EXPECT_EQ(service.process().stop(), 0);
    EXPECT_EQ(error_of([&] { s.channel().baseline_statfs("/x"); }), Errc::ChannelClosed);
    EXPECT_EQ(error_of([&] { Session again(service.address()); }), Errc::ServiceUnavailable);
}

TEST_F(TransportTest, BaselinePssFlushesEveryBatch)
{
    Session s(service.address());
    load(s, programs::pss_predict_update());
    BaselinePss pss(s);
    const auto model_before = std::vector<std::uint8_t>(s.segment().pss_region().begin(),
                                                        s.segment().pss_region().begin() + pss::kTableSize * 2);
    for (std::uint64_t i = 0; i < 63; ++i)
        pss.predict_update({i, i + 1, i + 2}, 0);
    EXPECT_EQ(pss.flushes(), 0u);
    EXPECT_EQ(pss.batch().pending.size(), 63u);
    EXPECT_TRUE(std::equal(model_before.begin(), model_before.end(), s.segment().pss_region().begin()));

    pss.predict_update({63, 64, 65}, 0);
    EXPECT_EQ(pss.flushes(), 1u);
    EXPECT_TRUE(pss.batch().pending.empty());
    EXPECT_EQ(s.channel().round_trips(), 1u);
    EXPECT_EQ(s.channel().copy_bytes(), 4u + 64u * 25u);

    pss::LocalModel replay;
    for (std::uint64_t i = 0; i < 64; ++i)
        replay.model().update({i, i + 1, i + 2}, 0);
    const auto region = s.segment().pss_region();
    EXPECT_TRUE(std::equal(replay.model().bytes().begin(), replay.model().bytes().end(), region.begin()));
}

TEST_F(TransportTest, BaselinePssPartialFlush)
{
    Session s(service.address());
    load(s, programs::pss_predict_update());
    BaselinePss pss(s, 8);
    for (std::uint64_t i = 0; i < 5; ++i)
        pss.predict_update({i, i, i}, 1);
    pss.flush();
    pss.flush();
    EXPECT_EQ(pss.flushes(), 1u);
    EXPECT_EQ(s.channel().round_trips(), 1u);
}

TEST_F(TransportTest, SbpfPssMatchesLocalReplay)
{
    Session s(service.address());
    SbpfPss pss(s, load(s, programs::pss_predict_update()).program);
    pss::LocalModel reference;
    std::mt19937_64 rng(21);
    const auto before = s.channel().stats();
    for (int i = 0; i < 10'000; ++i) {
        const pss::Features f{rng() % 300, rng() % 300, rng() % 300};
        const int outcome = static_cast<int>(rng() & 1);
        const int expected = reference.model().predict(f).decision;
        reference.model().update(f, outcome);
        ASSERT_EQ(pss.predict_update(f, outcome), expected) << i;
    }
    const auto after = s.channel().stats();
    EXPECT_EQ(after.round_trips, before.round_trips);
    EXPECT_EQ(after.copy_bytes, before.copy_bytes);
    const auto region = s.segment().pss_region();
    EXPECT_TRUE(std::equal(reference.model().bytes().begin(), reference.model().bytes().end(), region.begin()));
}

TEST_F(TransportTest, LoadWithWrongKeyIsRejected)
{
    Session s(service.address());
    const auto container = signed_container(programs::shm_roundtrip(), test::test_key(2));
    EXPECT_EQ(error_of([&] { s.load(1, container); }), Errc::IntegrityRejected);
    EXPECT_FALSE(s.mapped());
    const auto st = s.channel().stats();
    EXPECT_EQ(st.integrity_rejections, 1u);
    EXPECT_EQ(st.verifier_invocations, 0u);
}

TEST_F(TransportTest, LoadRejectsUnverifiableProgram)
{
    Session s(service.address());
    using namespace isa::ins;
    const auto bad = isa::Program::from_instructions({mov64_imm(0, 0), ja(-2), exit()});
    EXPECT_EQ(error_of([&] { load(s, bad); }), Errc::VerificationRejected);
    EXPECT_EQ(s.channel().stats().verifier_invocations, 1u);
}

TEST_F(TransportTest, AttachSharesSegment)
{
    Session owner(service.address());
    const LoadedLibrary lib = load(owner, programs::shm_roundtrip(), 4);
    Session other(service.address());
    other.attach(4, lib.base_handle);
    owner.segment().bytes[100] = 0x77;
    EXPECT_EQ(other.segment().bytes[100], 0x77);
    EXPECT_EQ(error_of([&] { Session(service.address()).attach(4, lib.base_handle + 1); }), Errc::NotFound);
    EXPECT_EQ(error_of([&] { Session(service.address()).attach(5, lib.base_handle); }), Errc::NotFound);
}

TEST_F(TransportTest, ReloadReusesSegment)
{
    Session s(service.address());
    const auto first = load(s, programs::shm_roundtrip(), 2);
    s.segment().bytes[0] = 1;
    const auto second = load(s, programs::ring_pusher(), 2);
    EXPECT_EQ(first.base_handle, second.base_handle);
    EXPECT_EQ(s.segment().bytes[0], 1);
}

TEST_F(TransportTest, ReleaseUnmaps)
{
    Session s(service.address());
    const auto lib = load(s, programs::shm_roundtrip(), 3);
    s.release();
    EXPECT_FALSE(s.mapped());
    EXPECT_EQ(error_of([&] { (void)s.segment(); }), Errc::NotFound);
    EXPECT_EQ(error_of([&] { Session(service.address()).attach(3, lib.base_handle); }), Errc::NotFound);
}
