#include "sbpf/pss.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace sbpf;

namespace {

void BM_PerceptronPredictUpdate(benchmark::State& state)
{
    pss::LocalModel model;
    std::mt19937_64 rng(1);
    std::vector<pss::Features> features(4096);
    for (auto& f : features)
        f = {rng() % 64, rng() % 64, rng() % 64};
    std::size_t i = 0;
    for (auto _ : state) {
        const auto& f = features[i++ & 4095];
        const auto p = model.model().predict(f);
        benchmark::DoNotOptimize(model.model().update(f, static_cast<int>(f[0] & 1)));
        benchmark::DoNotOptimize(p);
    }
}
BENCHMARK(BM_PerceptronPredictUpdate);

void BM_EncodeBatch(benchmark::State& state)
{
    std::vector<pss::UpdateRecord> batch(pss::kDefaultBatchSize);
    for (std::size_t i = 0; i < batch.size(); ++i)
        batch[i] = {{i, i * 3, i * 7}, static_cast<std::uint8_t>(i & 1)};
    for (auto _ : state)
        benchmark::DoNotOptimize(pss::encode_batch(batch));
}
BENCHMARK(BM_EncodeBatch);

} // namespace
