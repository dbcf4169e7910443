#include "test_support.hpp"

#include <fstream>
#include <iterator>
#include <sstream>
#include <stdexcept>

namespace sbpf::test {

namespace op = isa::op;

integrity::Key test_key(std::uint8_t seed)
{
    integrity::Key key{};
    for (std::size_t i = 0; i < key.size(); ++i)
        key[i] = static_cast<std::uint8_t>(seed * 31 + i * 7);
    return key;
}

std::vector<std::uint8_t> signed_container(const isa::Program& program, const integrity::Key& key)
{
    return integrity::sign_library(isa::encode_program(program), key).serialize();
}

verifier::VerifiedProgram must_verify(const isa::Program& program)
{
    auto verdict = verifier::verify(program, helpers::standard_signatures());
    if (auto* report = std::get_if<verifier::VerifierReport>(&verdict))
        throw std::runtime_error("program rejected:\n" + report->format());
    return std::get<verifier::VerifiedProgram>(std::move(verdict));
}

std::filesystem::path fixture_dir() { return SBPF_FIXTURE_DIR; }

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<std::pair<std::string, std::uint64_t>> conformance_expectations()
{
    std::ifstream in(fixture_dir() / "expected.txt");
    std::vector<std::pair<std::string, std::uint64_t>> out;
    std::string name;
    std::string value;
    while (in >> name >> value)
        out.emplace_back(name, std::stoull(value, nullptr, 16));
    return out;
}

namespace {

constexpr std::uint8_t kAluOps[] = {op::kAdd, op::kSub, op::kMul, op::kDiv, op::kOr,  op::kAnd, op::kLsh,
                                    op::kRsh, op::kNeg, op::kMod, op::kXor, op::kMov, op::kArsh};
constexpr std::uint8_t kJumpOps[] = {op::kJeq,  op::kJgt,  op::kJge,  op::kJset, op::kJne, op::kJsgt,
                                     op::kJsge, op::kJlt,  op::kJle,  op::kJslt, op::kJsle};
constexpr std::uint8_t kSizes[] = {op::kSizeB, op::kSizeH, op::kSizeW, op::kSizeDW};

template <typename T, std::size_t N>
T pick(std::mt19937_64& rng, const T (&items)[N])
{
    return items[rng() % N];
}

// Mostly r0-r5: those are initialized at entry or by the program's first move.
std::uint8_t reg(std::mt19937_64& rng) { return static_cast<std::uint8_t>(rng() % 4 ? rng() % 6 : rng() % 11); }

std::int32_t small_imm(std::mt19937_64& rng)
{
    switch (rng() % 4) {
    case 0: return static_cast<std::int32_t>(rng() % 16);
    case 1: return -static_cast<std::int32_t>(rng() % 16);
    case 2: return static_cast<std::int32_t>(rng() % 80);
    default: return static_cast<std::int32_t>(static_cast<std::uint32_t>(rng()));
    }
}

std::int16_t stack_offset(std::mt19937_64& rng)
{
    switch (rng() % 8) {
    case 0: return static_cast<std::int16_t>(-520 + static_cast<int>(rng() % 16));
    case 1: return static_cast<std::int16_t>(static_cast<int>(rng() % 12) - 4);
    default: return static_cast<std::int16_t>(-8 * static_cast<int>(1 + rng() % 64));
    }
}

isa::Instruction alu(std::mt19937_64& rng)
{
    const bool wide = rng() % 4 != 0;
    const std::uint8_t aop = pick(rng, kAluOps);
    const bool by_reg = aop != op::kNeg && rng() % 2;
    isa::Instruction insn;
    insn.opcode = static_cast<std::uint8_t>((wide ? op::kClassAlu64 : op::kClassAlu32) | aop | (by_reg ? op::kSrcReg : 0));
    insn.dst = reg(rng);
    insn.src = by_reg ? reg(rng) : 0;
    insn.imm = by_reg ? 0 : small_imm(rng);
    if (aop == op::kNeg)
        insn.imm = 0;
    return insn;
}

isa::Instruction branch(std::mt19937_64& rng)
{
    const bool wide = rng() % 3 != 0;
    const bool by_reg = rng() % 2;
    isa::Instruction insn;
    insn.opcode = static_cast<std::uint8_t>((wide ? op::kClassJmp : op::kClassJmp32) | pick(rng, kJumpOps)
                                            | (by_reg ? op::kSrcReg : 0));
    insn.dst = reg(rng);
    insn.src = by_reg ? reg(rng) : 0;
    insn.imm = by_reg ? 0 : small_imm(rng);
    insn.offset = static_cast<std::int16_t>(static_cast<int>(rng() % 10) - 3);
    return insn;
}

isa::Instruction memory(std::mt19937_64& rng)
{
    isa::Instruction insn;
    const std::uint8_t size = pick(rng, kSizes);
    const std::uint8_t base = rng() % 8 ? isa::kFramePointer : reg(rng);
    switch (rng() % 3) {
    case 0:
        insn.opcode = static_cast<std::uint8_t>(op::kClassLdx | op::kModeMem | size);
        insn.dst = reg(rng);
        insn.src = base;
        break;
    case 1:
        insn.opcode = static_cast<std::uint8_t>(op::kClassSt | op::kModeMem | size);
        insn.dst = base;
        insn.imm = small_imm(rng);
        break;
    default:
        insn.opcode = static_cast<std::uint8_t>(op::kClassStx | op::kModeMem | size);
        insn.dst = base;
        insn.src = reg(rng);
        break;
    }
    insn.offset = stack_offset(rng);
    return insn;
}

} // namespace

isa::Program random_program(std::mt19937_64& rng, std::size_t max_len)
{
    const std::size_t target = 1 + rng() % max_len;
    std::vector<isa::Instruction> out;
    if (target > 1 && rng() % 2)
        out.push_back(isa::ins::mov64_imm(0, small_imm(rng)));
    while (out.size() < target) {
        const bool last = out.size() + 1 == target;
        if (last && rng() % 8 != 0) {
            out.push_back(isa::ins::exit());
            break;
        }
        switch (rng() % 20) {
        case 0: case 1: case 2: case 3: case 4: case 5: case 6:
            out.push_back(alu(rng));
            break;
        case 7: case 8: case 9:
            out.push_back(branch(rng));
            break;
        case 10:
            out.push_back(isa::ins::ja(static_cast<std::int16_t>(static_cast<int>(rng() % 8) - 2)));
            break;
        case 11: case 12: case 13: case 14:
            out.push_back(memory(rng));
            break;
        case 15: case 16:
            out.push_back(isa::ins::call(static_cast<std::int32_t>(rng() % 13)));
            break;
        case 17:
            if (out.size() + 2 <= target) {
                for (const auto& slot : isa::ins::lddw(reg(rng) % 10, rng()))
                    out.push_back(slot);
                break;
            }
            [[fallthrough]];
        default:
            out.push_back(isa::ins::exit());
            break;
        }
    }
    return isa::Program::from_instructions(std::move(out));
}

ServiceHarness::ServiceHarness(transport::ServiceConfig config) : key_(config.key), process_(std::move(config)) {}

transport::ServiceConfig ServiceHarness::default_config()
{
    transport::ServiceConfig config;
    config.address = transport::unique_address();
    config.key = test_key();
    config.rng_seed = 7;
    return config;
}

} // namespace sbpf::test
