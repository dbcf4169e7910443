#include "sbpf/bench.hpp"

#include "sbpf/channel.hpp"
#include "sbpf/programs.hpp"
#include "sbpf/session.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <ctime>
#include <iomanip>
#include <ostream>
#include <random>
#include <sstream>

#include <sys/utsname.h>

namespace sbpf::bench {

using Clock = std::chrono::steady_clock;
using transport::Session;

namespace {

std::uint64_t ns_between(Clock::time_point a, Clock::time_point b)
{
    return static_cast<std::uint64_t>(std::chrono::duration_cast<std::chrono::nanoseconds>(b - a).count());
}

std::vector<std::uint8_t> signed_container(const isa::Program& program, const integrity::Key& key)
{
    return integrity::sign_library(isa::encode_program(program), key).serialize();
}

std::uint64_t splitmix64(std::uint64_t& state)
{
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

void clear_model(Session& session)
{
    auto region = session.segment().pss_region();
    std::memset(region.data(), 0, pss::kTableSize * 2);
}

} // namespace

std::string BenchReport::csv() const
{
    std::ostringstream out;
    out << kCsvHeader << '\n';
    for (const BenchRow& r : rows)
        out << r.scenario << ',' << r.param << ',' << r.baseline_ns << ',' << r.sbpf_ns << ',' << std::fixed
            << std::setprecision(3) << r.speedup << ',' << r.copies_baseline << ',' << r.copies_sbpf << '\n';
    return out.str();
}

void BenchReport::write_metadata(std::ostream& out) const
{
    out << "# host: " << metadata.host << '\n'
        << "# iterations: " << metadata.iterations << '\n'
        << "# timestamp: " << metadata.timestamp << '\n'
        << "# seed: " << metadata.seed << '\n';
}

BenchMetadata make_metadata(std::uint64_t iterations, std::uint64_t seed)
{
    BenchMetadata m;
    utsname u{};
    if (::uname(&u) == 0)
        m.host = std::string(u.sysname) + " " + u.release + " " + u.machine + " " + u.nodename;
    m.iterations = iterations;
    m.seed = seed;
    const std::time_t now = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    m.timestamp = buf;
    return m;
}

double speedup(std::uint64_t baseline_ns, std::uint64_t sbpf_ns) noexcept
{
    if (sbpf_ns == 0)
        return 0.0;
    return std::round(static_cast<double>(baseline_ns) / static_cast<double>(sbpf_ns) * 1000.0) / 1000.0;
}

std::uint64_t trimmed_mean(std::vector<std::uint64_t> samples)
{
    if (samples.empty())
        return 0;
    std::sort(samples.begin(), samples.end());
    std::size_t lo = 0;
    std::size_t hi = samples.size();
    if (samples.size() >= 3) {
        ++lo;
        --hi;
    }
    long double sum = 0;
    for (std::size_t i = lo; i < hi; ++i)
        sum += samples[i];
    return static_cast<std::uint64_t>(std::llround(sum / static_cast<long double>(hi - lo)));
}

std::uint64_t median(std::vector<std::uint64_t> samples)
{
    if (samples.empty())
        return 0;
    const std::size_t mid = samples.size() / 2;
    std::nth_element(samples.begin(), samples.begin() + static_cast<std::ptrdiff_t>(mid), samples.end());
    if (samples.size() % 2 == 1)
        return samples[mid];
    const std::uint64_t upper = samples[mid];
    const std::uint64_t lower = *std::max_element(samples.begin(), samples.begin() + static_cast<std::ptrdiff_t>(mid));
    return lower + (upper - lower) / 2;
}

RingResult bench_ring(const BenchEnv& env, const RingOptions& options)
{
    Session session(env.address);
    auto& channel = session.channel();
    const auto pusher = session.load(env.task, signed_container(programs::ring_pusher(), env.key)).program;
    transport::RingProducer producer(session, pusher);

    RingResult result;
    result.report.metadata = make_metadata(static_cast<std::uint64_t>(options.reps), options.seed);
    std::mt19937_64 rng(options.seed);

    struct SizeState {
        std::vector<std::array<std::uint8_t, 4>> records;
        std::uint64_t checksum = transport::kChecksumSeed;
        std::uint64_t copies_baseline = 0;
        std::uint64_t copies_sbpf = 0;
        std::uint64_t trips_baseline = 0;
        std::uint64_t trips_sbpf = 0;
        std::vector<std::uint64_t> baseline_ns;
        std::vector<std::uint64_t> sbpf_ns;
        std::vector<std::uint64_t> producer_ns;
        std::vector<std::uint64_t> consumer_ns;
    };
    std::vector<SizeState> state(options.sizes.size());
    for (std::size_t k = 0; k < state.size(); ++k) {
        state[k].records.resize(options.sizes[k]);
        for (auto& r : state[k].records) {
            transport::put_u32(r.data(), static_cast<std::uint32_t>(rng()));
            state[k].checksum = transport::fold_checksum(state[k].checksum, r);
        }
    }
    const int rounds = std::max(options.rounds, 1);

    // Reps are interleaved across sizes so a slow stretch of the host does not
    // land on every rep of one size. The first pass is warmup.
    for (int rep = -1; rep < options.reps; ++rep) {
        for (std::size_t k = 0; k < state.size(); ++k) {
            SizeState& st = state[k];
            const std::uint64_t size = st.records.size();
            std::uint64_t baseline_total = 0;
            std::uint64_t producer_total = 0;
            std::uint64_t consumer_total = 0;
            for (int round = 0; round < rounds; ++round) {
                const std::uint64_t copy0 = channel.copy_bytes();
                const std::uint64_t trip0 = channel.round_trips();
                const auto b0 = Clock::now();
                for (const auto& r : st.records) {
                    const auto echo = channel.baseline_drain_one(r);
                    if (echo.size() != r.size() || !std::equal(echo.begin(), echo.end(), r.begin()))
                        throw Error(Errc::ProtocolError, "drain echo mismatch");
                }
                const auto b1 = Clock::now();
                const std::uint64_t copy1 = channel.copy_bytes();
                const std::uint64_t trip1 = channel.round_trips();

                const auto p0 = Clock::now();
                for (const auto& r : st.records)
                    if (!producer.push(r))
                        throw Error(Errc::ProtocolError, "ring unexpectedly full");
                const auto p1 = Clock::now();
                const transport::RingDrainReply reply = channel.ring_doorbell(size);
                const auto c1 = Clock::now();
                if (reply.count != size || reply.checksum != st.checksum)
                    throw Error(Errc::ProtocolError, "ring consumer saw different records than were pushed");

                baseline_total += ns_between(b0, b1);
                producer_total += ns_between(p0, p1);
                consumer_total += ns_between(p1, c1);
                st.copies_baseline = copy1 - copy0;
                st.trips_baseline = trip1 - trip0;
                st.copies_sbpf = channel.copy_bytes() - copy1;
                st.trips_sbpf = channel.round_trips() - trip1;
            }
            if (rep < 0)
                continue;
            const auto n = static_cast<std::uint64_t>(rounds);
            st.baseline_ns.push_back(baseline_total / n);
            st.producer_ns.push_back(producer_total / n);
            st.consumer_ns.push_back(consumer_total / n);
            st.sbpf_ns.push_back((producer_total + consumer_total) / n);
        }
    }

    for (SizeState& st : state) {
        const auto size = static_cast<std::uint32_t>(st.records.size());
        BenchRow row;
        row.scenario = "ring";
        row.param = size;
        row.baseline_ns = trimmed_mean(st.baseline_ns);
        row.sbpf_ns = trimmed_mean(st.sbpf_ns);
        row.speedup = speedup(row.baseline_ns, row.sbpf_ns);
        row.copies_baseline = st.copies_baseline;
        row.copies_sbpf = st.copies_sbpf;
        result.report.rows.push_back(row);
        result.details.push_back(
            {size, st.trips_baseline, st.trips_sbpf, trimmed_mean(st.producer_ns), trimmed_mean(st.consumer_ns)});
    }
    return result;
}

std::vector<std::size_t> default_copy_lengths()
{
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < 9; ++k)
        out.push_back(9 + 234 * k / 8);
    return out;
}

std::string random_path(std::uint64_t& state, std::size_t length)
{
    static constexpr char alphabet[] = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_-./";
    std::string path(length, '/');
    for (std::size_t i = 1; i < length; ++i)
        path[i] = alphabet[splitmix64(state) % (sizeof alphabet - 1)];
    return path;
}

CopyResult bench_copy(const BenchEnv& env, const CopyOptions& options)
{
    Session session(env.address);
    auto& channel = session.channel();
    const auto writer = session.load(env.task, signed_container(programs::statfs_args_writer(), env.key)).program;
    const auto reader = session.load(env.task, signed_container(programs::statfs_retval_reader(), env.key)).program;
    transport::StatfsClient client(session, options.thread_id, writer, reader);

    CopyResult result;
    result.report.metadata = make_metadata(options.iterations, options.seed);
    std::uint64_t state = options.seed;

    for (std::size_t length : options.lengths) {
        std::vector<std::string> paths(std::max<std::uint64_t>(options.iterations, 1));
        for (auto& p : paths)
            p = random_path(state, length);

        for (std::uint64_t i = 0; i < options.warmup; ++i) {
            const std::string& p = paths[i % paths.size()];
            if (channel.baseline_statfs(p) != client.sbpf_statfs(p))
                throw Error(Errc::ProtocolError, "statfs paths disagree on \"" + p + "\"");
        }

        std::vector<std::uint64_t> baseline_mean;
        std::vector<std::uint64_t> sbpf_mean;
        std::vector<std::uint64_t> baseline_calls;
        std::vector<std::uint64_t> sbpf_calls;
        baseline_calls.reserve(options.iterations * static_cast<std::size_t>(options.reps));
        sbpf_calls.reserve(options.iterations * static_cast<std::size_t>(options.reps));
        std::uint64_t copies_baseline = 0;
        std::uint64_t copies_sbpf = 0;

        for (int rep = 0; rep < options.reps; ++rep) {
            const std::uint64_t copy0 = channel.copy_bytes();
            std::uint64_t total = 0;
            for (std::uint64_t i = 0; i < options.iterations; ++i) {
                const auto t0 = Clock::now();
                const transport::StatRecord rec = channel.baseline_statfs(paths[i]);
                const auto t1 = Clock::now();
                if (rec.path_len != length)
                    throw Error(Errc::ProtocolError, "baseline statfs returned a wrong record");
                baseline_calls.push_back(ns_between(t0, t1));
                total += baseline_calls.back();
            }
            baseline_mean.push_back(options.iterations ? total / options.iterations : 0);
            const std::uint64_t copy1 = channel.copy_bytes();

            total = 0;
            for (std::uint64_t i = 0; i < options.iterations; ++i) {
                const auto t0 = Clock::now();
                const transport::StatRecord rec = client.sbpf_statfs(paths[i]);
                const auto t1 = Clock::now();
                if (rec.path_len != length)
                    throw Error(Errc::ProtocolError, "sbpf statfs returned a wrong record");
                sbpf_calls.push_back(ns_between(t0, t1));
                total += sbpf_calls.back();
            }
            sbpf_mean.push_back(options.iterations ? total / options.iterations : 0);
            copies_baseline = copy1 - copy0;
            copies_sbpf = channel.copy_bytes() - copy1;
        }

        BenchRow row;
        row.scenario = "copy";
        row.param = static_cast<std::int64_t>(length);
        row.baseline_ns = trimmed_mean(baseline_mean);
        row.sbpf_ns = trimmed_mean(sbpf_mean);
        row.speedup = speedup(row.baseline_ns, row.sbpf_ns);
        row.copies_baseline = copies_baseline;
        row.copies_sbpf = copies_sbpf;
        result.report.rows.push_back(row);
        result.details.push_back({length, median(std::move(baseline_calls)), median(std::move(sbpf_calls)),
                                  options.iterations ? copies_baseline / options.iterations : 0});
    }
    return result;
}

std::vector<Sample> drift_stream(const PssOptions& options)
{
    std::mt19937_64 rng(options.seed);
    std::array<std::array<std::uint64_t, 64>, 3> values{};
    std::array<std::array<int, 64>, 3> signs{};
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t v = 0; v < 64; ++v) {
            values[i][v] = rng();
            signs[i][v] = (rng() & 1) ? 1 : -1;
        }
    auto uniform = [&] { return static_cast<double>(rng() >> 11) * 0x1.0p-53; };

    std::vector<Sample> out(options.samples);
    std::array<std::size_t, 3> idx{};
    for (std::uint64_t t = 0; t < options.samples; ++t) {
        if (t == 0 || uniform() >= options.locality)
            for (auto& k : idx)
                k = static_cast<std::size_t>(rng() % 64);
        int score = 0;
        for (std::size_t i = 0; i < 3; ++i) {
            out[t].features[i] = values[i][idx[i]];
            score += signs[i][idx[i]];
        }
        const int phase = options.flip_period ? static_cast<int>((t / options.flip_period) % 2) : 0;
        out[t].label = (score > 0 ? 1 : 0) ^ phase;
    }
    return out;
}

PssResult bench_pss(const BenchEnv& env, const PssOptions& options)
{
    const std::vector<Sample> stream = drift_stream(options);
    Session session(env.address);
    auto& channel = session.channel();
    const auto program = session.load(env.task, signed_container(programs::pss_predict_update(), env.key)).program;

    PssResult result;
    result.report.metadata = make_metadata(options.samples, options.seed);
    const double n = stream.empty() ? 1.0 : static_cast<double>(stream.size());

    clear_model(session);
    transport::BaselinePss baseline(session, options.batch_size, options.params);
    std::uint64_t copy0 = channel.copy_bytes();
    std::uint64_t trip0 = channel.round_trips();
    std::uint64_t correct = 0;
    auto t0 = Clock::now();
    for (const Sample& s : stream)
        correct += baseline.predict_update(s.features, s.label) == s.label;
    auto t1 = Clock::now();
    const std::uint64_t baseline_total = ns_between(t0, t1);
    result.accuracy_baseline = static_cast<double>(correct) / n;
    result.round_trips_baseline = channel.round_trips() - trip0;
    const std::uint64_t copies_baseline = channel.copy_bytes() - copy0;

    clear_model(session);
    transport::SbpfPss sbpf(session, program, options.params);
    copy0 = channel.copy_bytes();
    trip0 = channel.round_trips();
    correct = 0;
    t0 = Clock::now();
    for (const Sample& s : stream)
        correct += sbpf.predict_update(s.features, s.label) == s.label;
    t1 = Clock::now();
    const std::uint64_t sbpf_total = ns_between(t0, t1);
    result.accuracy_sbpf = static_cast<double>(correct) / n;
    result.round_trips_sbpf = channel.round_trips() - trip0;
    const std::uint64_t copies_sbpf = channel.copy_bytes() - copy0;

    auto region = session.segment().pss_region();
    result.final_model_sbpf.assign(region.begin(), region.begin() + pss::kTableSize * 2);

    BenchRow row;
    row.scenario = "pss";
    row.param = static_cast<std::int64_t>(options.flip_period);
    row.baseline_ns = stream.empty() ? 0 : baseline_total / stream.size();
    row.sbpf_ns = stream.empty() ? 0 : sbpf_total / stream.size();
    row.speedup = speedup(row.baseline_ns, row.sbpf_ns);
    row.copies_baseline = copies_baseline;
    row.copies_sbpf = copies_sbpf;
    result.report.rows.push_back(row);
    return result;
}

} // namespace sbpf::bench
