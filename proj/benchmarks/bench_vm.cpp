#include "sbpf/builder.hpp"
#include "sbpf/helpers.hpp"
#include "sbpf/programs.hpp"
#include "sbpf/verifier.hpp"
#include "sbpf/vm.hpp"

#include <benchmark/benchmark.h>

#include <vector>

using namespace sbpf;

namespace {

verifier::VerifiedProgram must_verify(const isa::Program& program)
{
    auto verdict = verifier::verify(program, helpers::standard_signatures());
    return std::get<verifier::VerifiedProgram>(std::move(verdict));
}

isa::Program alu_chain(int n)
{
    using namespace isa::ins;
    isa::Builder b;
    b.emit(mov64_reg(0, 1));
    for (int i = 0; i < n; ++i) {
        b.emit(add64_imm(0, i));
        b.emit(alu64_reg(isa::op::kXor, 0, 2));
    }
    b.emit(exit());
    return b.build();
}

void BM_VmAluChain(benchmark::State& state)
{
    const auto program = must_verify(alu_chain(static_cast<int>(state.range(0))));
    vm::Vm machine(helpers::standard_helpers());
    std::vector<std::uint8_t> ctx(16);
    std::uint64_t word = 0;
    for (auto _ : state)
        benchmark::DoNotOptimize(machine.execute(program, {word++, ctx}));
    state.SetItemsProcessed(state.iterations() * (2 * state.range(0) + 2));
}
BENCHMARK(BM_VmAluChain)->Arg(8)->Arg(64)->Arg(256);

void BM_VmShmRoundtrip(benchmark::State& state)
{
    const auto program = must_verify(programs::shm_roundtrip());
    std::vector<std::uint8_t> segment(shmem::kSegmentSize);
    vm::Vm machine(helpers::standard_helpers(), shmem::SegmentView{segment, 0});
    std::vector<std::uint8_t> ctx;
    for (auto _ : state)
        benchmark::DoNotOptimize(machine.execute(program, {0, ctx}));
}
BENCHMARK(BM_VmShmRoundtrip);

void BM_Verify(benchmark::State& state)
{
    const auto program = programs::statfs_args_writer();
    const auto sigs = helpers::standard_signatures();
    for (auto _ : state)
        benchmark::DoNotOptimize(verifier::analyze(program, sigs));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(program.size()));
}
BENCHMARK(BM_Verify);

} // namespace
