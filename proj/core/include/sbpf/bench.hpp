#pragma once

#include "sbpf/integrity.hpp"
#include "sbpf/pss.hpp"
#include "sbpf/shmem.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

/// Benchmark drivers comparing the copy-based boundary against the shared
/// memory paths. All of them talk to a running service.
namespace sbpf::bench {

inline constexpr const char* kCsvHeader = "scenario,param,baseline_ns,sbpf_ns,speedup,copies_baseline,copies_sbpf";

struct BenchRow {
    std::string scenario;
    std::int64_t param = 0;
    std::uint64_t baseline_ns = 0;
    std::uint64_t sbpf_ns = 0;
    double speedup = 0;
    std::uint64_t copies_baseline = 0;
    std::uint64_t copies_sbpf = 0;
};

struct BenchMetadata {
    std::string host;
    std::uint64_t iterations = 0;
    std::string timestamp;
    std::uint64_t seed = 0;
};

struct BenchReport {
    std::vector<BenchRow> rows;
    BenchMetadata metadata;

    /// Header plus one line per row; speedup with 3 decimals.
    std::string csv() const;
    /// `# key: value` lines.
    void write_metadata(std::ostream& out) const;
};

BenchMetadata make_metadata(std::uint64_t iterations, std::uint64_t seed);

/// baseline / sbpf rounded to 3 decimal places.
double speedup(std::uint64_t baseline_ns, std::uint64_t sbpf_ns) noexcept;

/// Mean after dropping one minimum and one maximum (plain mean below 3 samples).
std::uint64_t trimmed_mean(std::vector<std::uint64_t> samples);
std::uint64_t median(std::vector<std::uint64_t> samples);

struct BenchEnv {
    std::string address;
    integrity::Key key{};
    shmem::TaskId task = 1;
};

struct RingOptions {
    std::vector<std::uint32_t> sizes{32, 64, 96, 128, 160, 192, 224, 256};
    int reps = 5;
    int rounds = 8; // batches averaged into one rep
    std::uint64_t seed = 1;
};

struct RingDetail {
    std::uint32_t size = 0;
    std::uint64_t baseline_round_trips = 0;
    std::uint64_t sbpf_round_trips = 0;
    std::uint64_t producer_ns = 0;
    std::uint64_t consumer_ns = 0;
};

struct RingResult {
    BenchReport report;
    std::vector<RingDetail> details;
};

RingResult bench_ring(const BenchEnv& env, const RingOptions& options);

std::vector<std::size_t> default_copy_lengths();

struct CopyOptions {
    std::vector<std::size_t> lengths = default_copy_lengths();
    std::uint64_t iterations = 10'000;
    int reps = 7;
    std::uint64_t seed = 1;
    std::uint64_t warmup = 200;
    std::uint32_t thread_id = 0;
};

struct CopyDetail {
    std::size_t length = 0;
    std::uint64_t median_baseline_ns = 0;
    std::uint64_t median_sbpf_ns = 0;
    std::uint64_t copies_per_call = 0;
};

struct CopyResult {
    BenchReport report;
    std::vector<CopyDetail> details;
};

/// Throws ProtocolError when the two paths disagree during warmup.
CopyResult bench_copy(const BenchEnv& env, const CopyOptions& options);

/// Deterministic path of exactly `length` bytes starting with '/'.
std::string random_path(std::uint64_t& state, std::size_t length);

struct PssOptions {
    std::uint64_t samples = 20'000;
    std::uint64_t flip_period = 500; // 0: no drift
    std::size_t batch_size = pss::kDefaultBatchSize;
    double locality = 0.5;           // probability a sample repeats the previous features
    std::uint64_t seed = 1;
    pss::ModelParams params;
};

struct Sample {
    pss::Features features{};
    int label = 0;
};

/// Label-drift stream: three features, each one of 64 values with a hidden
/// sign; label = [sum of signs > 0] XOR phase, phase flipping every
/// flip_period samples.
std::vector<Sample> drift_stream(const PssOptions& options);

struct PssResult {
    BenchReport report;
    double accuracy_baseline = 0;
    double accuracy_sbpf = 0;
    std::uint64_t round_trips_baseline = 0;
    std::uint64_t round_trips_sbpf = 0;
    std::vector<std::uint8_t> final_model_sbpf;
};

PssResult bench_pss(const BenchEnv& env, const PssOptions& options);

} // namespace sbpf::bench
