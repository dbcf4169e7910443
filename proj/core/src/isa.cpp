#include "sbpf/isa.hpp"

#include "sbpf/error.hpp"

#include <cstdio>
#include <cstring>

namespace sbpf::isa {

namespace {

bool is_alu_op(std::uint8_t code) noexcept
{
    switch (code) {
    case op::kAdd: case op::kSub: case op::kMul: case op::kDiv:
    case op::kOr: case op::kAnd: case op::kLsh: case op::kRsh:
    case op::kMod: case op::kXor: case op::kMov: case op::kArsh:
        return true;
    default:
        return false;
    }
}

bool is_cond_jump_op(std::uint8_t code) noexcept
{
    switch (code) {
    case op::kJeq: case op::kJgt: case op::kJge: case op::kJset:
    case op::kJne: case op::kJsgt: case op::kJsge: case op::kJlt:
    case op::kJle: case op::kJslt: case op::kJsle:
        return true;
    default:
        return false;
    }
}

std::string hex(std::int64_t value)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%#llx", static_cast<unsigned long long>(value));
    return value == 0 ? std::string("0x0") : std::string(buf);
}

// Rust-style {:#x} of an i32: two's complement for negative values.
std::string hex32(std::int32_t value) { return hex(static_cast<std::uint32_t>(value)); }

std::string signed_offset(std::int16_t off)
{
    return off >= 0 ? "+" + hex(off) : "-" + hex(-static_cast<std::int64_t>(off));
}

std::string reg(std::uint8_t r) { return "r" + std::to_string(r); }

// Structural validation shared by Program construction and encoding.
// Throws with `opcode_error` for opcode-level problems.
void validate(std::span<const Instruction> insns, Errc opcode_error, std::vector<std::uint8_t>* continuation)
{
    bool expect_hi = false;
    for (std::size_t pc = 0; pc < insns.size(); ++pc) {
        const Instruction& insn = insns[pc];
        if (expect_hi) {
            if (insn.opcode != 0 || insn.dst != 0 || insn.src != 0 || insn.offset != 0)
                throw Error(opcode_error, "malformed lddw continuation at slot " + std::to_string(pc), pc);
            if (continuation)
                (*continuation)[pc] = 1;
            expect_hi = false;
            continue;
        }
        if (!is_supported_opcode(insn.opcode)) {
            char buf[16];
            std::snprintf(buf, sizeof buf, "0x%02x", insn.opcode);
            throw Error(opcode_error, std::string("opcode ") + buf + " at slot " + std::to_string(pc), pc);
        }
        const Kind kind = kind_of(insn.opcode);
        if ((kind == Kind::Alu32 || kind == Kind::Alu64) && insn.offset != 0)
            throw Error(opcode_error, "nonzero offset on alu instruction at slot " + std::to_string(pc), pc);
        if ((kind == Kind::Call || kind == Kind::WideLoad) && insn.src != 0)
            throw Error(opcode_error, "unsupported src mode at slot " + std::to_string(pc), pc);
        if (insn.dst >= kNumRegisters || insn.src >= kNumRegisters)
            throw Error(opcode_error == Errc::InvalidOpcode ? Errc::InvalidRegister : opcode_error,
                        "register index out of range at slot " + std::to_string(pc), pc);
        if (kind == Kind::WideLoad) {
            if (pc + 1 == insns.size())
                throw Error(opcode_error == Errc::InvalidOpcode ? Errc::TruncatedWideLoad : opcode_error,
                            "lddw in final slot", pc);
            expect_hi = true;
        }
    }
}

} // namespace

std::size_t access_width(std::uint8_t opcode) noexcept
{
    switch (mem_size(opcode)) {
    case op::kSizeB: return 1;
    case op::kSizeH: return 2;
    case op::kSizeW: return 4;
    default: return 8;
    }
}

bool is_supported_opcode(std::uint8_t opcode) noexcept
{
    const std::uint8_t cls = op_class(opcode);
    switch (cls) {
    case op::kClassAlu64:
    case op::kClassAlu32:
        if (alu_op(opcode) == op::kNeg)
            return !uses_reg_source(opcode);
        return is_alu_op(alu_op(opcode));
    case op::kClassJmp:
        if (opcode == op::kJaOp || opcode == op::kCallOp || opcode == op::kExitOp)
            return true;
        return is_cond_jump_op(alu_op(opcode));
    case op::kClassJmp32:
        return is_cond_jump_op(alu_op(opcode));
    case op::kClassLdx:
    case op::kClassSt:
    case op::kClassStx:
        return (opcode & 0xe0) == op::kModeMem;
    case op::kClassLd:
        return opcode == op::kLddw;
    default:
        return false;
    }
}

Kind kind_of(std::uint8_t opcode) noexcept
{
    switch (op_class(opcode)) {
    case op::kClassAlu64: return Kind::Alu64;
    case op::kClassAlu32: return Kind::Alu32;
    case op::kClassJmp:
        if (opcode == op::kJaOp) return Kind::Jump;
        if (opcode == op::kCallOp) return Kind::Call;
        if (opcode == op::kExitOp) return Kind::Exit;
        return Kind::Branch;
    case op::kClassJmp32: return Kind::Branch;
    case op::kClassLdx: return Kind::Load;
    case op::kClassSt: return Kind::Store;
    case op::kClassStx: return Kind::StoreReg;
    default: return Kind::WideLoad;
    }
}

bool is_jump(const Instruction& insn) noexcept
{
    const Kind k = kind_of(insn.opcode);
    return is_supported_opcode(insn.opcode) && (k == Kind::Jump || k == Kind::Branch);
}

std::string mnemonic(std::uint8_t opcode)
{
    static const char* const alu_names[16] = {"add", "sub", "mul", "div", "or", "and", "lsh", "rsh",
                                              "neg", "mod", "xor", "mov", "arsh", "?", "?", "?"};
    static const char* const jmp_names[16] = {"ja", "jeq", "jgt", "jge", "jset", "jne", "jsgt", "jsge",
                                              "call", "exit", "jlt", "jle", "jslt", "jsle", "?", "?"};
    static const char* const size_names[4] = {"w", "h", "b", "dw"};
    if (!is_supported_opcode(opcode))
        return "unknown";
    const std::string size = size_names[mem_size(opcode) >> 3];
    switch (op_class(opcode)) {
    case op::kClassAlu64: return std::string(alu_names[opcode >> 4]) + "64";
    case op::kClassAlu32: return std::string(alu_names[opcode >> 4]) + "32";
    case op::kClassJmp: return jmp_names[opcode >> 4];
    case op::kClassJmp32: return std::string(jmp_names[opcode >> 4]) + "32";
    case op::kClassLdx: return "ldx" + size;
    case op::kClassSt: return "st" + size;
    case op::kClassStx: return "stx" + size;
    default: return "lddw";
    }
}

std::string disassemble(const Instruction& insn, std::uint64_t wide_imm)
{
    const std::string name = mnemonic(insn.opcode);
    if (name == "unknown")
        return "unknown";
    auto mem = [&](std::uint8_t base) {
        return "[" + reg(base) + signed_offset(insn.offset) + "]";
    };
    switch (kind_of(insn.opcode)) {
    case Kind::Alu64:
    case Kind::Alu32:
        if (alu_op(insn.opcode) == op::kNeg)
            return name + " " + reg(insn.dst);
        if (uses_reg_source(insn.opcode))
            return name + " " + reg(insn.dst) + ", " + reg(insn.src);
        return name + " " + reg(insn.dst) + ", " + hex32(insn.imm);
    case Kind::Jump:
        return name + " " + signed_offset(insn.offset);
    case Kind::Branch:
        if (uses_reg_source(insn.opcode))
            return name + " " + reg(insn.dst) + ", " + reg(insn.src) + ", " + signed_offset(insn.offset);
        return name + " " + reg(insn.dst) + ", " + hex32(insn.imm) + ", " + signed_offset(insn.offset);
    case Kind::Call:
        return name + " " + hex32(insn.imm);
    case Kind::Exit:
        return name;
    case Kind::Load:
        return name + " " + reg(insn.dst) + ", " + mem(insn.src);
    case Kind::Store:
        return name + " " + mem(insn.dst) + ", " + hex32(insn.imm);
    case Kind::StoreReg:
        return name + " " + mem(insn.dst) + ", " + reg(insn.src);
    case Kind::WideLoad:
    case Kind::WideLoadHi:
        return name + " " + reg(insn.dst) + ", " + hex(static_cast<std::int64_t>(wide_imm));
    }
    return name;
}

Program::Program(std::vector<Instruction> instructions)
    : instructions_(std::move(instructions))
    , continuation_(instructions_.size(), 0)
{
    validate(instructions_, Errc::InvalidOpcode, &continuation_);
}

Program Program::from_instructions(std::vector<Instruction> instructions)
{
    if (instructions.empty())
        throw Error(Errc::EmptyProgram, "program has no instructions");
    return Program(std::move(instructions));
}

std::uint64_t Program::wide_immediate(std::size_t slot) const
{
    const auto lo = static_cast<std::uint32_t>(instructions_.at(slot).imm);
    const auto hi = static_cast<std::uint32_t>(instructions_.at(slot + 1).imm);
    return static_cast<std::uint64_t>(lo) | (static_cast<std::uint64_t>(hi) << 32);
}

void encode_instruction(const Instruction& insn, std::span<std::uint8_t, kSlotSize> out) noexcept
{
    const auto off = static_cast<std::uint16_t>(insn.offset);
    const auto imm = static_cast<std::uint32_t>(insn.imm);
    out[0] = insn.opcode;
    out[1] = static_cast<std::uint8_t>((insn.src << 4) | (insn.dst & 0x0f));
    out[2] = static_cast<std::uint8_t>(off & 0xff);
    out[3] = static_cast<std::uint8_t>(off >> 8);
    for (int i = 0; i < 4; ++i)
        out[4 + i] = static_cast<std::uint8_t>(imm >> (8 * i));
}

Instruction decode_instruction(std::span<const std::uint8_t, kSlotSize> in) noexcept
{
    Instruction insn;
    insn.opcode = in[0];
    insn.dst = in[1] & 0x0f;
    insn.src = in[1] >> 4;
    insn.offset = static_cast<std::int16_t>(static_cast<std::uint16_t>(in[2] | (in[3] << 8)));
    std::uint32_t imm = 0;
    for (int i = 0; i < 4; ++i)
        imm |= static_cast<std::uint32_t>(in[4 + i]) << (8 * i);
    insn.imm = static_cast<std::int32_t>(imm);
    return insn;
}

Program decode_program(std::span<const std::uint8_t> bytes)
{
    if (bytes.empty() || bytes.size() % kSlotSize != 0)
        throw Error(Errc::InvalidLength, "byte length " + std::to_string(bytes.size()) + " is not a nonzero multiple of 8");
    std::vector<Instruction> insns;
    insns.reserve(bytes.size() / kSlotSize);
    for (std::size_t i = 0; i < bytes.size(); i += kSlotSize)
        insns.push_back(decode_instruction(bytes.subspan(i).first<kSlotSize>()));
    return Program::from_instructions(std::move(insns));
}

std::vector<std::uint8_t> encode_program(std::span<const Instruction> instructions)
{
    if (instructions.empty())
        throw Error(Errc::EmptyProgram, "program has no instructions");
    validate(instructions, Errc::UnsupportedInstruction, nullptr);
    std::vector<std::uint8_t> out(instructions.size() * kSlotSize);
    for (std::size_t i = 0; i < instructions.size(); ++i)
        encode_instruction(instructions[i], std::span<std::uint8_t>(out).subspan(i * kSlotSize).first<kSlotSize>());
    return out;
}

std::vector<std::uint8_t> encode_program(const Program& program)
{
    return encode_program(std::span<const Instruction>(program.instructions()));
}

} // namespace sbpf::isa
