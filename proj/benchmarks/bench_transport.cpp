#include "sbpf/channel.hpp"
#include "sbpf/integrity.hpp"
#include "sbpf/programs.hpp"
#include "sbpf/service.hpp"
#include "sbpf/session.hpp"

#include <benchmark/benchmark.h>

#include <memory>
#include <string>

using namespace sbpf;

namespace {

integrity::Key bench_key()
{
    integrity::Key key{};
    for (std::size_t i = 0; i < key.size(); ++i)
        key[i] = static_cast<std::uint8_t>(i * 11 + 3);
    return key;
}

transport::ServiceProcess& service()
{
    static std::unique_ptr<transport::ServiceProcess> proc = [] {
        transport::ServiceConfig config;
        config.address = transport::unique_address();
        config.key = bench_key();
        return std::make_unique<transport::ServiceProcess>(config);
    }();
    return *proc;
}

void BM_BaselineStatfs(benchmark::State& state)
{
    auto channel = transport::BoundaryChannel::connect(service().address());
    const std::string path(static_cast<std::size_t>(state.range(0)), 'p');
    for (auto _ : state)
        benchmark::DoNotOptimize(channel.baseline_statfs(path));
}
BENCHMARK(BM_BaselineStatfs)->Arg(9)->Arg(243);

void BM_SbpfStatfs(benchmark::State& state)
{
    transport::Session session(service().address());
    const auto key = bench_key();
    auto sign = [&](const isa::Program& p) {
        return integrity::sign_library(isa::encode_program(p), key).serialize();
    };
    const auto writer = session.load(7, sign(programs::statfs_args_writer())).program;
    const auto reader = session.load(7, sign(programs::statfs_retval_reader())).program;
    transport::StatfsClient client(session, 0, writer, reader);
    const std::string path(static_cast<std::size_t>(state.range(0)), 'p');
    for (auto _ : state)
        benchmark::DoNotOptimize(client.sbpf_statfs(path));
    session.release();
}
BENCHMARK(BM_SbpfStatfs)->Arg(9)->Arg(243);

void BM_DrainOne(benchmark::State& state)
{
    auto channel = transport::BoundaryChannel::connect(service().address());
    const std::vector<std::uint8_t> record(4, 1);
    for (auto _ : state)
        benchmark::DoNotOptimize(channel.baseline_drain_one(record));
}
BENCHMARK(BM_DrainOne);

} // namespace
