#include "test_support.hpp"

#include "sbpf/bench.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace sbpf;
using namespace sbpf::bench;

namespace {

BenchEnv env_for(test::ServiceHarness& h, shmem::TaskId task = 1) { return {h.address(), h.key(), task}; }

} // namespace

TEST(BenchStats, Speedup)
{
    EXPECT_DOUBLE_EQ(speedup(3000, 1000), 3.0);
    EXPECT_DOUBLE_EQ(speedup(1000, 3000), 0.333);
    EXPECT_DOUBLE_EQ(speedup(2, 3), 0.667);
    EXPECT_DOUBLE_EQ(speedup(5, 0), 0.0);
}

TEST(BenchStats, TrimmedMeanAndMedian)
{
    EXPECT_EQ(trimmed_mean({}), 0u);
    EXPECT_EQ(trimmed_mean({4, 6}), 5u);
    EXPECT_EQ(trimmed_mean({1, 10, 11, 12, 1000}), 11u);
    EXPECT_EQ(median({5, 1, 3}), 3u);
    EXPECT_EQ(median({4, 1, 3, 2}), 2u);
}

TEST(BenchReport, CsvFormat)
{
    BenchReport r;
    r.rows.push_back({"ring", 32, 2000, 1000, 2.0, 256, 0});
    r.rows.push_back({"copy", 9, 100, 300, 0.333, 73, 0});
    EXPECT_EQ(r.csv(), std::string(kCsvHeader) + "\n"
                           "ring,32,2000,1000,2.000,256,0\n"
                           "copy,9,100,300,0.333,73,0\n");
}

TEST(BenchReport, Metadata)
{
    BenchReport r;
    r.metadata = make_metadata(10, 42);
    std::ostringstream out;
    r.write_metadata(out);
    const std::string text = out.str();
    EXPECT_NE(text.find("# iterations: 10\n"), std::string::npos);
    EXPECT_NE(text.find("# seed: 42\n"), std::string::npos);
    EXPECT_NE(text.find("# host: "), std::string::npos);
    EXPECT_NE(text.find("# timestamp: "), std::string::npos);
}

TEST(BenchGrid, Defaults)
{
    EXPECT_EQ(RingOptions{}.sizes, (std::vector<std::uint32_t>{32, 64, 96, 128, 160, 192, 224, 256}));
    EXPECT_EQ(default_copy_lengths(), (std::vector<std::size_t>{9, 38, 67, 96, 126, 155, 184, 213, 243}));
}

TEST(BenchPaths, RandomPath)
{
    std::uint64_t a = 5;
    std::uint64_t b = 5;
    for (std::size_t len : {1u, 9u, 243u, 4095u}) {
        const std::string p = random_path(a, len);
        ASSERT_EQ(p.size(), len);
        EXPECT_EQ(p[0], '/');
        EXPECT_EQ(p, random_path(b, len));
    }
    std::uint64_t c = 6;
    EXPECT_NE(random_path(a, 64), random_path(c, 64));
}

TEST(DriftStream, DeterministicAndFlipping)
{
    PssOptions o;
    o.samples = 4000;
    const auto s1 = drift_stream(o);
    const auto s2 = drift_stream(o);
    ASSERT_EQ(s1.size(), 4000u);
    for (std::size_t i = 0; i < s1.size(); ++i) {
        ASSERT_EQ(s1[i].features, s2[i].features);
        ASSERT_EQ(s1[i].label, s2[i].label);
    }
    // Identical features on both sides of a flip get opposite labels.
    PssOptions still = o;
    still.flip_period = 0;
    const auto s3 = drift_stream(still);
    for (std::size_t i = 0; i < s1.size(); ++i) {
        ASSERT_EQ(s1[i].features, s3[i].features);
        ASSERT_EQ(s1[i].label, s3[i].label ^ static_cast<int>((i / 500) % 2));
    }
}

TEST(BenchRun, RingSmall)
{
    test::ServiceHarness h;
    RingOptions o;
    o.sizes = {32, 64};
    o.reps = 2;
    const RingResult r = bench_ring(env_for(h), o);
    ASSERT_EQ(r.report.rows.size(), 2u);
    EXPECT_EQ(r.report.rows[0].scenario, "ring");
    EXPECT_EQ(r.report.rows[0].param, 32);
    EXPECT_EQ(r.report.rows[0].copies_baseline, 32u * 8u);
    EXPECT_EQ(r.report.rows[1].copies_baseline, 64u * 8u);
    for (const auto& row : r.report.rows) {
        EXPECT_EQ(row.copies_sbpf, 0u);
        EXPECT_GT(row.baseline_ns, 0u);
        EXPECT_GT(row.sbpf_ns, 0u);
    }
    EXPECT_EQ(r.details[0].baseline_round_trips, 32u);
    EXPECT_EQ(r.details[0].sbpf_round_trips, 0u);
}

TEST(BenchRun, CopySmall)
{
    test::ServiceHarness h;
    CopyOptions o;
    o.lengths = {9, 243};
    o.iterations = 50;
    o.reps = 3;
    o.warmup = 20;
    const CopyResult r = bench_copy(env_for(h), o);
    ASSERT_EQ(r.report.rows.size(), 2u);
    EXPECT_EQ(r.report.rows[0].copies_baseline, 50u * (9u + 64u));
    EXPECT_EQ(r.report.rows[1].copies_baseline, 50u * (243u + 64u));
    EXPECT_EQ(r.details[1].copies_per_call, 243u + 64u);
    for (const auto& row : r.report.rows)
        EXPECT_EQ(row.copies_sbpf, 0u);
}

TEST(BenchRun, PssWithoutDriftLearnsOnBothPaths)
{
    test::ServiceHarness h;
    PssOptions o;
    o.samples = 20000;
    o.flip_period = 0;
    const PssResult r = bench_pss(env_for(h), o);
    EXPECT_EQ(r.round_trips_sbpf, 0u);
    EXPECT_EQ(r.round_trips_baseline, 20000u / 64u);
    EXPECT_GT(r.accuracy_sbpf, 0.8);
    EXPECT_LT(std::abs(r.accuracy_sbpf - r.accuracy_baseline), 0.02);

    pss::LocalModel replay;
    for (const Sample& s : drift_stream(o))
        replay.model().update(s.features, s.label);
    EXPECT_TRUE(std::equal(replay.model().bytes().begin(), replay.model().bytes().end(),
                           r.final_model_sbpf.begin(), r.final_model_sbpf.end()));
}
