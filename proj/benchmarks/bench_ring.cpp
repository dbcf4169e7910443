#include "sbpf/ring.hpp"

#include <benchmark/benchmark.h>

#include <cstdint>
#include <vector>

using namespace sbpf;

namespace {

void BM_RingPushConsume(benchmark::State& state)
{
    std::vector<std::uint64_t> storage((256 * 1024) / 8);
    std::span<std::uint8_t> region(reinterpret_cast<std::uint8_t*>(storage.data()), storage.size() * 8);
    ring::SpscRing ring(region);
    const std::size_t len = static_cast<std::size_t>(state.range(0));
    const std::vector<std::uint8_t> payload(len, 0x5a);
    std::uint64_t sink = 0;
    for (auto _ : state) {
        for (int i = 0; i < 32; ++i)
            ring.push(payload);
        ring.consume(32, [&](std::span<const std::uint8_t> r) { sink += r[0]; });
    }
    benchmark::DoNotOptimize(sink);
    state.SetItemsProcessed(state.iterations() * 32);
    state.SetBytesProcessed(state.iterations() * 32 * static_cast<std::int64_t>(len));
}
BENCHMARK(BM_RingPushConsume)->Arg(4)->Arg(64)->Arg(1024);

} // namespace
