#include "sbpf/channel.hpp"
#include "sbpf/error.hpp"
#include "sbpf/pss.hpp"
#include "sbpf/wire.hpp"

#include <gtest/gtest.h>

#include <sys/socket.h>
#include <unistd.h>

using namespace sbpf;
using namespace sbpf::transport;

TEST(Fnv, KnownValues)
{
    EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ull);
    EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cull);
    EXPECT_EQ(fnv1a64("/"), 0xaf63a24c860189feull);
    EXPECT_EQ(fnv1a64("/usr/lib"), 0xd62aa2c9105758e0ull);
}

TEST(StatRecord, RootPath)
{
    const StatRecord r = compute_stat("/");
    EXPECT_EQ(r.path_len, 1u);
    EXPECT_EQ(r.path_hash, 0xaf63a24c860189feull);
    EXPECT_EQ(r.block_size, kStatBlockSize);
    EXPECT_EQ(r.blocks, 100862u);
}

TEST(StatRecord, BytesRoundtrip)
{
    const StatRecord r = compute_stat("/var/tmp/x");
    const auto bytes = r.to_bytes();
    EXPECT_EQ(StatRecord::from_bytes(bytes), r);
    EXPECT_EQ(get_u64(bytes.data()), r.path_len);
    EXPECT_EQ(get_u64(bytes.data() + 8), r.path_hash);
    for (std::size_t i = 32; i < kStatRecordSize; ++i)
        EXPECT_EQ(bytes[i], 0);
    auto dirty = bytes;
    dirty[40] = 1;
    EXPECT_THROW(StatRecord::from_bytes(dirty), Error);
    EXPECT_THROW(StatRecord::from_bytes(std::span(bytes).first(63)), Error);
}

TEST(StatRecord, Deterministic) { EXPECT_EQ(compute_stat("/etc/hosts"), compute_stat("/etc/hosts")); }

TEST(Integers, LittleEndian)
{
    std::uint8_t buf[8];
    put_u32(buf, 0x11223344);
    EXPECT_EQ(buf[0], 0x44);
    EXPECT_EQ(get_u32(buf), 0x11223344u);
    put_u64(buf, 0x0102030405060708ull);
    EXPECT_EQ(buf[0], 0x08);
    EXPECT_EQ(buf[7], 0x01);
    EXPECT_EQ(get_u64(buf), 0x0102030405060708ull);
}

TEST(Status, ErrorMapping)
{
    for (Status s : {Status::IntegrityRejected, Status::VerificationRejected, Status::AllocationFailed,
                     Status::NotFound, Status::InvalidThread, Status::LengthExceedsSlot, Status::AlreadyAllocated,
                     Status::PathTooLong})
        EXPECT_EQ(to_status(to_errc(s)), s) << to_string(s);
    EXPECT_EQ(to_errc(Status::IntegrityRejected), Errc::IntegrityRejected);
}

TEST(Framing, ReadExactAndEof)
{
    int fds[2];
    ASSERT_EQ(::socketpair(AF_UNIX, SOCK_STREAM, 0, fds), 0);
    const std::vector<std::uint8_t> out{1, 2, 3, 4, 5};
    write_all(fds[0], out);
    std::vector<std::uint8_t> in(5);
    EXPECT_TRUE(read_exact(fds[1], in));
    EXPECT_EQ(in, out);
    write_all(fds[0], std::vector<std::uint8_t>{9});
    ::close(fds[0]);
    std::vector<std::uint8_t> two(2);
    EXPECT_THROW(read_exact(fds[1], two), Error);
    std::vector<std::uint8_t> one(1);
    EXPECT_FALSE(read_exact(fds[1], one));
    ::close(fds[1]);
}

TEST(ServiceStats, Encoding)
{
    const ServiceStats s{1, 2, 3, 4, 5};
    const auto bytes = s.encode();
    EXPECT_EQ(bytes.size(), 40u);
    const ServiceStats d = ServiceStats::decode(bytes);
    EXPECT_EQ(d.copy_bytes, 1u);
    EXPECT_EQ(d.verifier_invocations, 5u);
    EXPECT_THROW(ServiceStats::decode(std::span(bytes).first(39)), Error);
}

TEST(Batch, WireFormat)
{
    const std::vector<pss::UpdateRecord> recs{{{1, 2, 3}, 1}, {{~0ull, 0, 7}, 0}};
    const auto bytes = pss::encode_batch(recs);
    ASSERT_EQ(bytes.size(), 4 + 2 * pss::kUpdateRecordWireSize);
    EXPECT_EQ(get_u32(bytes.data()), 2u);
    EXPECT_EQ(get_u64(bytes.data() + 4), 1u);
    EXPECT_EQ(bytes[4 + 24], 1);
    EXPECT_EQ(pss::decode_batch(bytes), recs);
    auto bad = bytes;
    bad.pop_back();
    EXPECT_THROW(pss::decode_batch(bad), Error);
    auto bad_outcome = bytes;
    bad_outcome[4 + 24] = 2;
    EXPECT_THROW(pss::decode_batch(bad_outcome), Error);
}

TEST(Checksum, OrderSensitive)
{
    const std::vector<std::uint8_t> a{1, 0, 0, 0}, b{2, 0, 0, 0};
    const auto ab = fold_checksum(fold_checksum(kChecksumSeed, a), b);
    const auto ba = fold_checksum(fold_checksum(kChecksumSeed, b), a);
    EXPECT_NE(ab, ba);
}
