#include "sbpf/bench.hpp"
#include "sbpf/channel.hpp"
#include "sbpf/helpers.hpp"
#include "sbpf/integrity.hpp"
#include "sbpf/isa.hpp"
#include "sbpf/service.hpp"
#include "sbpf/verifier.hpp"
#include "sbpf/vm.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <iterator>
#include <memory>
#include <optional>
#include <random>

using namespace sbpf;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRejected = 1;
constexpr int kExitServiceError = 2;

std::vector<std::uint8_t> read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(Errc::IoError, "cannot open " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, std::span<const std::uint8_t> bytes)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw Error(Errc::IoError, "cannot write " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out)
        throw Error(Errc::IoError, "short write to " + path);
}

std::optional<integrity::Key> resolve_key(const std::string& key_file)
{
    if (!key_file.empty())
        return integrity::load_key_file(key_file);
    return integrity::key_from_env();
}

integrity::Key require_key(const std::string& key_file)
{
    if (auto key = resolve_key(key_file))
        return *key;
    throw Error(Errc::IoError, "no key: pass --key-file or set SBPF_SERVICE_KEY");
}

integrity::Key random_key()
{
    std::random_device rd;
    integrity::Key key{};
    for (auto& b : key)
        b = static_cast<std::uint8_t>(rd());
    return key;
}

int exit_code_for(Errc code)
{
    switch (code) {
    case Errc::IntegrityRejected:
    case Errc::VerificationRejected:
    case Errc::MalformedContainer:
    case Errc::EmptyPayload:
        return kExitRejected;
    default:
        return kExitServiceError;
    }
}

void emit_csv(const bench::BenchReport& report, const std::string& out_path)
{
    report.write_metadata(std::cerr);
    if (out_path.empty()) {
        std::cout << report.csv();
        return;
    }
    std::ofstream out(out_path, std::ios::trunc);
    if (!out)
        throw Error(Errc::IoError, "cannot write " + out_path);
    out << report.csv();
}

int cmd_verify(const std::string& path)
{
    const auto bytes = read_file(path);
    std::optional<isa::Program> program;
    try {
        program.emplace(isa::decode_program(bytes));
    } catch (const Error& e) {
        std::cout << e.position().value_or(0) << '\t' << to_string(verifier::ViolationKind::InvalidInstruction) << '\t'
                  << e.what() << '\n';
        return kExitRejected;
    }
    const verifier::VerifierReport report = verifier::analyze(*program, helpers::standard_signatures());
    if (report.accepted) {
        std::cerr << "accepted: " << report.instruction_count << " instructions\n";
        return kExitOk;
    }
    std::cout << report.format();
    return kExitRejected;
}

int cmd_run(const std::string& path, std::uint64_t ctx)
{
    const isa::Program program = isa::decode_program(read_file(path));
    auto verdict = verifier::verify(program, helpers::standard_signatures());
    if (auto* report = std::get_if<verifier::VerifierReport>(&verdict)) {
        std::cout << report->format();
        return kExitRejected;
    }
    std::vector<std::uint8_t> segment(shmem::kSegmentSize);
    vm::Vm machine(helpers::standard_helpers(), shmem::SegmentView{segment, 0});
    std::vector<std::uint8_t> buffer;
    const std::uint64_t r0 = machine.execute(std::get<verifier::VerifiedProgram>(verdict), {ctx, buffer});
    char hex[32];
    std::snprintf(hex, sizeof hex, "0x%llx", static_cast<unsigned long long>(r0));
    std::cout << r0 << ' ' << hex << '\n';
    return kExitOk;
}

int cmd_sign(const std::string& payload_path, const std::string& out_path, const std::string& key_file)
{
    const integrity::Key key = require_key(key_file);
    const auto container = integrity::sign_library(read_file(payload_path), key).serialize();
    std::string out = out_path;
    if (out.empty()) {
        const auto dot = payload_path.find_last_of('.');
        const auto slash = payload_path.find_last_of('/');
        const bool has_ext = dot != std::string::npos && (slash == std::string::npos || dot > slash);
        out = (has_ext ? payload_path.substr(0, dot) : payload_path) + ".sbpf";
    }
    write_file(out, container);
    std::cerr << "wrote " << out << " (" << container.size() << " bytes)\n";
    return kExitOk;
}

int cmd_load(const std::string& container_path, const std::string& socket, std::uint64_t task)
{
    const auto container = read_file(container_path);
    auto channel = transport::BoundaryChannel::connect(socket);
    try {
        const transport::AllocReply reply = channel.alloc(task, container);
        char hex[32];
        std::snprintf(hex, sizeof hex, "0x%016llx", static_cast<unsigned long long>(reply.base_handle));
        std::cout << "base_handle " << hex << '\n' << "object " << reply.object_name << '\n';
    } catch (const Error& e) {
        std::cerr << "load rejected: " << e.what() << '\n';
        return exit_code_for(e.code());
    }
    return kExitOk;
}

int cmd_serve(const std::string& socket, const std::string& key_file, std::uint64_t seed)
{
    transport::ServiceConfig config;
    config.address = socket.empty() ? transport::unique_address() : socket;
    config.key = require_key(key_file);
    config.rng_seed = seed;
    transport::Service service(config);
    std::cout << "listening on " << service.address() << std::endl;
    service.run();
    const auto c = service.load_counters();
    std::cerr << "integrity_checks " << c.integrity_checks << " rejections " << c.integrity_rejections
              << " verifier_invocations " << c.verifier_invocations << '\n';
    return kExitOk;
}

int cmd_stats(const std::string& socket)
{
    auto channel = transport::BoundaryChannel::connect(socket);
    const transport::ServiceStats s = channel.stats();
    std::cout << "copy_bytes " << s.copy_bytes << '\n'
              << "round_trips " << s.round_trips << '\n'
              << "integrity_checks " << s.integrity_checks << '\n'
              << "integrity_rejections " << s.integrity_rejections << '\n'
              << "verifier_invocations " << s.verifier_invocations << '\n';
    return kExitOk;
}

struct BenchTarget {
    bench::BenchEnv env;
    std::unique_ptr<transport::ServiceProcess> process;
};

BenchTarget bench_target(const std::string& socket, const std::string& key_file, std::uint64_t seed)
{
    BenchTarget t;
    if (!socket.empty()) {
        t.env.address = socket;
        t.env.key = require_key(key_file);
        return t;
    }
    transport::ServiceConfig config;
    config.address = transport::unique_address();
    config.key = resolve_key(key_file).value_or(random_key());
    config.rng_seed = seed;
    t.process = std::make_unique<transport::ServiceProcess>(config);
    t.env.address = t.process->address();
    t.env.key = config.key;
    return t;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Shared-memory BPF toolkit"};
    app.require_subcommand(1);

    std::string key_file;
    std::string socket;
    std::string out;
    std::uint64_t seed = 1;

    std::string prog_path;
    auto* verify = app.add_subcommand("verify", "Verify a raw BPF program");
    verify->add_option("program", prog_path, "Program bytecode (.bpf)")->required();

    std::uint64_t ctx = 0;
    auto* run = app.add_subcommand("run", "Verify and execute a BPF program");
    run->add_option("program", prog_path, "Program bytecode (.bpf)")->required();
    run->add_option("--ctx", ctx, "Context word passed in r1");

    auto* sign = app.add_subcommand("sign", "Wrap a payload in a signed .sbpf container");
    sign->add_option("payload", prog_path, "Payload file")->required();
    sign->add_option("-o,--out", out, "Container path (default: payload with .sbpf extension)");
    sign->add_option("--key-file", key_file, "File holding the 64-hex-digit key");

    std::uint64_t task = 1;
    auto* load = app.add_subcommand("load", "Submit a container to a running service");
    load->add_option("container", prog_path, "Signed container (.sbpf)")->required();
    load->add_option("--socket", socket, "Service address")->required();
    load->add_option("--task", task, "Task id");

    auto* serve = app.add_subcommand("serve", "Run the service in the foreground");
    serve->add_option("--socket", socket, "Listen address ('@name' for the abstract namespace)");
    serve->add_option("--key-file", key_file, "File holding the 64-hex-digit key");
    serve->add_option("--seed", seed, "Base handle RNG seed");

    auto* stats = app.add_subcommand("stats", "Print service counters");
    stats->add_option("--socket", socket, "Service address")->required();

    auto* bench_cmd = app.add_subcommand("bench", "Run a benchmark and print CSV");
    bench_cmd->require_subcommand(1);
    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--socket", socket, "Existing service address (default: spawn one)");
        cmd->add_option("--key-file", key_file, "File holding the 64-hex-digit key");
        cmd->add_option("--seed", seed, "Generator seed");
        cmd->add_option("--out", out, "CSV output file (default: stdout)");
    };

    bench::RingOptions ring_opts;
    auto* ring = bench_cmd->add_subcommand("ring", "Ring buffer drain: per-record round trips vs shared ring");
    add_common(ring);
    ring->add_option("--sizes", ring_opts.sizes, "Record counts")->delimiter(',');
    ring->add_option("--iterations,--reps", ring_opts.reps, "Repetitions per size")->check(CLI::PositiveNumber);
    ring->add_option("--rounds", ring_opts.rounds, "Batches averaged into each repetition")->check(CLI::PositiveNumber);

    bench::CopyOptions copy_opts;
    auto* copy = bench_cmd->add_subcommand("copy", "statfs: copied arguments vs thread slot memory");
    add_common(copy);
    copy->add_option("--lengths", copy_opts.lengths, "Path lengths")->delimiter(',');
    copy->add_option("--iterations", copy_opts.iterations, "Calls per repetition");
    copy->add_option("--reps", copy_opts.reps, "Repetitions")->check(CLI::PositiveNumber);
    copy->add_option("--thread", copy_opts.thread_id, "Thread slot");

    bench::PssOptions pss_opts;
    auto* pss = bench_cmd->add_subcommand("pss", "Perceptron: batched vs immediate updates");
    add_common(pss);
    pss->add_option("--iterations,--samples", pss_opts.samples, "Stream length");
    pss->add_option("--flip-period", pss_opts.flip_period, "Label flip period (0: no drift)");
    pss->add_option("--batch-size", pss_opts.batch_size, "Baseline batch size")->check(CLI::PositiveNumber);
    pss->add_option("--locality", pss_opts.locality, "Probability a sample repeats the previous one")
        ->check(CLI::Range(0.0, 1.0));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitServiceError;
    }

    try {
        if (*verify)
            return cmd_verify(prog_path);
        if (*run)
            return cmd_run(prog_path, ctx);
        if (*sign)
            return cmd_sign(prog_path, out, key_file);
        if (*load)
            return cmd_load(prog_path, socket, task);
        if (*serve)
            return cmd_serve(socket, key_file, seed);
        if (*stats)
            return cmd_stats(socket);

        BenchTarget target = bench_target(socket, key_file, seed);
        if (*ring) {
            ring_opts.seed = seed;
            const auto result = bench::bench_ring(target.env, ring_opts);
            emit_csv(result.report, out);
        } else if (*copy) {
            copy_opts.seed = seed;
            const auto result = bench::bench_copy(target.env, copy_opts);
            emit_csv(result.report, out);
            for (const auto& d : result.details)
                std::cerr << "# length " << d.length << " median_baseline_ns " << d.median_baseline_ns
                          << " median_sbpf_ns " << d.median_sbpf_ns << " copies_per_call " << d.copies_per_call
                          << '\n';
        } else if (*pss) {
            pss_opts.seed = seed;
            const auto result = bench::bench_pss(target.env, pss_opts);
            emit_csv(result.report, out);
            std::cerr << "# accuracy_baseline " << result.accuracy_baseline << '\n'
                      << "# accuracy_sbpf " << result.accuracy_sbpf << '\n'
                      << "# round_trips_baseline " << result.round_trips_baseline << '\n'
                      << "# round_trips_sbpf " << result.round_trips_sbpf << '\n';
        }
        if (target.process)
            target.process->stop();
        return kExitOk;
    } catch (const integrity::VerificationError& e) {
        std::cerr << e.what() << '\n' << e.report().format();
        return kExitRejected;
    } catch (const Error& e) {
        std::cerr << "error: " << to_string(e.code()) << ": " << e.what() << '\n';
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitServiceError;
    }
}
