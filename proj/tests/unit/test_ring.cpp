#include "sbpf/error.hpp"
#include "sbpf/ring.hpp"

#include <gtest/gtest.h>

#include <cstring>
#include <random>
#include <thread>

using namespace sbpf;
using namespace sbpf::ring;

namespace {

struct Region {
    explicit Region(std::size_t bytes) : words((bytes + 7) / 8) {}
    std::span<std::uint8_t> span() { return {reinterpret_cast<std::uint8_t*>(words.data()), words.size() * 8}; }
    std::vector<std::uint64_t> words;
};

std::vector<std::uint8_t> rec(std::initializer_list<std::uint8_t> b) { return b; }

} // namespace

TEST(Ring, Geometry)
{
    EXPECT_EQ(capacity_for(256 * 1024), 131072u);
    EXPECT_EQ(capacity_for(128 + 1024), 1024u);
    EXPECT_EQ(capacity_for(100), 0u);
    EXPECT_EQ(record_footprint(1), 16u);
    EXPECT_EQ(record_footprint(8), 16u);
    EXPECT_EQ(record_footprint(9), 24u);
    Region r(kHeaderSize + 1024);
    EXPECT_THROW(SpscRing(r.span(), 1000), std::invalid_argument);
    EXPECT_THROW(SpscRing(r.span(), 2048), std::invalid_argument);
    EXPECT_THROW(SpscRing(r.span().subspan(4), 512), std::invalid_argument);
}

TEST(Ring, FifoRoundtrip)
{
    Region r(kHeaderSize + 1024);
    SpscRing ring(r.span());
    for (std::uint8_t v : {1, 2, 3})
        ASSERT_EQ(ring.push(rec({v})), PushResult::Ok);
    const auto out = ring.drain_batch(10);
    ASSERT_EQ(out.size(), 3u);
    EXPECT_EQ(out[0].payload, rec({1}));
    EXPECT_EQ(out[1].payload, rec({2}));
    EXPECT_EQ(out[2].payload, rec({3}));
}

TEST(Ring, EmptyDrain)
{
    Region r(kHeaderSize + 1024);
    SpscRing ring(r.span());
    EXPECT_TRUE(ring.drain_batch(10).empty());
    EXPECT_EQ(ring.occupancy(), 0u);
}

TEST(Ring, RecordTooLarge)
{
    Region r(kHeaderSize + 1024);
    SpscRing ring(r.span());
    const std::vector<std::uint8_t> big(ring.capacity());
    try {
        ring.push(big);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::RecordTooLarge);
    }
    EXPECT_THROW(ring.push({}), Error);
    EXPECT_EQ(ring.push(std::vector<std::uint8_t>(ring.max_record_len())), PushResult::Ok);
}

TEST(Ring, BackpressureAndRecovery)
{
    Region r(kHeaderSize + 1024);
    SpscRing ring(r.span());
    const std::vector<std::uint8_t> payload(56, 7); // 64-byte footprint
    int pushed = 0;
    while (ring.push(payload) == PushResult::Ok)
        ++pushed;
    EXPECT_EQ(pushed, 16);
    EXPECT_EQ(ring.occupancy(), ring.capacity());
    EXPECT_EQ(ring.push(payload), PushResult::Full);
    EXPECT_EQ(ring.drain_batch(1).size(), 1u);
    EXPECT_EQ(ring.push(payload), PushResult::Ok);
}

TEST(Ring, BatchWindowing)
{
    Region r(kHeaderSize + 1024);
    SpscRing ring(r.span());
    for (std::uint8_t v = 0; v < 5; ++v)
        ring.push(rec({v}));
    const auto first = ring.drain_batch(3);
    const auto rest = ring.drain_batch(3);
    ASSERT_EQ(first.size(), 3u);
    ASSERT_EQ(rest.size(), 2u);
    EXPECT_EQ(first[2].payload, rec({2}));
    EXPECT_EQ(rest[0].payload, rec({3}));
    EXPECT_EQ(rest[1].payload, rec({4}));
}

TEST(Ring, MixedSizesBitIdentical)
{
    Region r(kHeaderSize + 4096);
    SpscRing ring(r.span());
    std::mt19937_64 rng(3);
    std::vector<std::vector<std::uint8_t>> sent;
    for (int round = 0; round < 30; ++round) {
        for (std::size_t len : {std::size_t{8}, std::size_t{100}, std::size_t{1000}}) {
            std::vector<std::uint8_t> p(len);
            for (auto& b : p)
                b = static_cast<std::uint8_t>(rng());
            ASSERT_EQ(ring.push(p), PushResult::Ok);
            sent.push_back(std::move(p));
        }
        const auto got = ring.drain_batch(100);
        ASSERT_EQ(got.size(), 3u);
        for (std::size_t i = 0; i < 3; ++i)
            EXPECT_EQ(got[i].payload, sent[sent.size() - 3 + i]);
    }
}

TEST(Ring, WrapUsesSkipMarker)
{
    Region r(kHeaderSize + 256);
    SpscRing ring(r.span());
    const std::vector<std::uint8_t> a(100, 1); // footprint 112
    ASSERT_EQ(ring.push(a), PushResult::Ok);
    ASSERT_EQ(ring.push(a), PushResult::Ok);
    ASSERT_EQ(ring.drain_batch(1).size(), 1u);
    // 32 bytes remain before the end; the next record must restart at 0.
    ASSERT_EQ(ring.push(a), PushResult::Ok);
    EXPECT_EQ(ring.tail(), 224u + 32u + 112u);
    std::uint32_t marker;
    std::memcpy(&marker, r.span().data() + kHeaderSize + 224, 4);
    EXPECT_NE(marker & kSkipFlag, 0u);
    const auto got = ring.drain_batch(10);
    ASSERT_EQ(got.size(), 2u);
    EXPECT_EQ(got[1].payload, a);
    EXPECT_EQ(ring.head(), ring.tail());
}

TEST(Ring, ConsumeIsZeroCopy)
{
    Region r(kHeaderSize + 1024);
    SpscRing ring(r.span());
    ring.push(rec({4, 3, 2, 1}));
    const std::uint8_t* data_begin = r.span().data() + kHeaderSize;
    std::size_t seen = ring.consume(8, [&](std::span<const std::uint8_t> p) {
        EXPECT_GE(p.data(), data_begin);
        EXPECT_EQ(p.size(), 4u);
        EXPECT_EQ(p[0], 4);
    });
    EXPECT_EQ(seen, 1u);
    EXPECT_EQ(ring.occupancy(), 0u);
}

TEST(Ring, SeparateViewsShareState)
{
    Region r(kHeaderSize + 1024);
    SpscRing producer(r.span());
    SpscRing consumer(r.span());
    producer.push(rec({9}));
    const auto got = consumer.drain_batch(4);
    ASSERT_EQ(got.size(), 1u);
    EXPECT_EQ(got[0].payload, rec({9}));
    EXPECT_EQ(producer.occupancy(), 0u);
}

TEST(Ring, ThreadedStress)
{
    Region r(kHeaderSize + 4096);
    SpscRing producer(r.span());
    SpscRing consumer(r.span());
    constexpr std::uint64_t kCount = 200000;
    std::thread t([&] {
        std::mt19937_64 rng(1);
        for (std::uint64_t i = 0; i < kCount;) {
            std::vector<std::uint8_t> p(8 + rng() % 200);
            std::memcpy(p.data(), &i, 8);
            if (producer.push(p) == PushResult::Ok)
                ++i;
            else
                std::this_thread::yield();
        }
    });
    std::uint64_t expected = 0;
    bool ordered = true;
    while (expected < kCount) {
        const std::size_t n = consumer.consume(64, [&](std::span<const std::uint8_t> p) {
            std::uint64_t seq;
            std::memcpy(&seq, p.data(), 8);
            ordered = ordered && seq == expected;
            ++expected;
        });
        if (n == 0)
            std::this_thread::yield();
        ASSERT_LE(consumer.occupancy(), consumer.capacity());
    }
    t.join();
    EXPECT_TRUE(ordered);
}
