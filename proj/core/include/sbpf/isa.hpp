#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

/// Encoding, decoding and structural validation of BPF bytecode.
///
/// Each slot is 8 bytes, little-endian: opcode, a byte packing dst (low
/// nibble) and src (high nibble), a signed 16-bit offset and a signed 32-bit
/// immediate. The wide-immediate load (LDDW) spans two slots; the second
/// slot carries the upper 32 bits of the constant in its imm field.
namespace sbpf::isa {

inline constexpr std::size_t kSlotSize = 8;
inline constexpr std::size_t kMaxProgramLen = 4096;
inline constexpr std::size_t kStackSize = 512;
inline constexpr std::uint8_t kNumRegisters = 11;
inline constexpr std::uint8_t kFramePointer = 10;

namespace op {
// instruction classes
inline constexpr std::uint8_t kClassLd = 0x00;
inline constexpr std::uint8_t kClassLdx = 0x01;
inline constexpr std::uint8_t kClassSt = 0x02;
inline constexpr std::uint8_t kClassStx = 0x03;
inline constexpr std::uint8_t kClassAlu32 = 0x04;
inline constexpr std::uint8_t kClassJmp = 0x05;
inline constexpr std::uint8_t kClassJmp32 = 0x06;
inline constexpr std::uint8_t kClassAlu64 = 0x07;

// source operand selector for ALU/JMP
inline constexpr std::uint8_t kSrcImm = 0x00;
inline constexpr std::uint8_t kSrcReg = 0x08;

// ALU operation codes (upper nibble)
inline constexpr std::uint8_t kAdd = 0x00;
inline constexpr std::uint8_t kSub = 0x10;
inline constexpr std::uint8_t kMul = 0x20;
inline constexpr std::uint8_t kDiv = 0x30;
inline constexpr std::uint8_t kOr = 0x40;
inline constexpr std::uint8_t kAnd = 0x50;
inline constexpr std::uint8_t kLsh = 0x60;
inline constexpr std::uint8_t kRsh = 0x70;
inline constexpr std::uint8_t kNeg = 0x80;
inline constexpr std::uint8_t kMod = 0x90;
inline constexpr std::uint8_t kXor = 0xa0;
inline constexpr std::uint8_t kMov = 0xb0;
inline constexpr std::uint8_t kArsh = 0xc0;

// JMP operation codes (upper nibble)
inline constexpr std::uint8_t kJa = 0x00;
inline constexpr std::uint8_t kJeq = 0x10;
inline constexpr std::uint8_t kJgt = 0x20;
inline constexpr std::uint8_t kJge = 0x30;
inline constexpr std::uint8_t kJset = 0x40;
inline constexpr std::uint8_t kJne = 0x50;
inline constexpr std::uint8_t kJsgt = 0x60;
inline constexpr std::uint8_t kJsge = 0x70;
inline constexpr std::uint8_t kCall = 0x80;
inline constexpr std::uint8_t kExit = 0x90;
inline constexpr std::uint8_t kJlt = 0xa0;
inline constexpr std::uint8_t kJle = 0xb0;
inline constexpr std::uint8_t kJslt = 0xc0;
inline constexpr std::uint8_t kJsle = 0xd0;

// memory access size (bits 3-4) and mode (bits 5-7)
inline constexpr std::uint8_t kSizeW = 0x00;
inline constexpr std::uint8_t kSizeH = 0x08;
inline constexpr std::uint8_t kSizeB = 0x10;
inline constexpr std::uint8_t kSizeDW = 0x18;
inline constexpr std::uint8_t kModeImm = 0x00;
inline constexpr std::uint8_t kModeMem = 0x60;

// full opcodes used by name throughout the code base
inline constexpr std::uint8_t kLddw = kClassLd | kModeImm | kSizeDW; // 0x18
inline constexpr std::uint8_t kJaOp = kClassJmp | kJa;               // 0x05
inline constexpr std::uint8_t kCallOp = kClassJmp | kCall;           // 0x85
inline constexpr std::uint8_t kExitOp = kClassJmp | kExit;           // 0x95
} // namespace op

constexpr std::uint8_t op_class(std::uint8_t opcode) noexcept { return opcode & 0x07; }
constexpr std::uint8_t alu_op(std::uint8_t opcode) noexcept { return opcode & 0xf0; }
constexpr std::uint8_t mem_size(std::uint8_t opcode) noexcept { return opcode & 0x18; }
constexpr bool uses_reg_source(std::uint8_t opcode) noexcept { return (opcode & op::kSrcReg) != 0; }

/// Width in bytes of a memory access opcode's operand.
std::size_t access_width(std::uint8_t opcode) noexcept;

struct Instruction {
    std::uint8_t opcode = 0;
    std::uint8_t dst = 0;
    std::uint8_t src = 0;
    std::int16_t offset = 0;
    std::int32_t imm = 0;

    friend bool operator==(const Instruction&, const Instruction&) = default;
};

enum class Kind {
    Alu64,
    Alu32,
    Jump,   // unconditional JA
    Branch, // conditional, JMP or JMP32 class
    Call,
    Exit,
    Load,       // LDX from memory
    Store,      // ST immediate to memory
    StoreReg,   // STX register to memory
    WideLoad,   // first slot of LDDW
    WideLoadHi, // continuation slot of LDDW
};

/// True iff `opcode` is a first-slot opcode in the supported set.
bool is_supported_opcode(std::uint8_t opcode) noexcept;

/// Classifies a supported first-slot opcode. Continuation slots are not
/// classified here; see Program::is_continuation.
Kind kind_of(std::uint8_t opcode) noexcept;

bool is_jump(const Instruction& insn) noexcept;

/// Human-readable mnemonic, e.g. "add64", "jsgt32", "ldxdw".
std::string mnemonic(std::uint8_t opcode);

/// One-line disassembly in the usual objdump-like syntax.
std::string disassemble(const Instruction& insn, std::uint64_t wide_imm = 0);

/// A structurally valid instruction stream. Construction validates opcodes,
/// register indices and LDDW pairing; length limits are the verifier's job.
class Program {
public:
    static Program from_instructions(std::vector<Instruction> instructions);

    const std::vector<Instruction>& instructions() const noexcept { return instructions_; }
    std::size_t size() const noexcept { return instructions_.size(); }
    const Instruction& operator[](std::size_t slot) const { return instructions_[slot]; }

    /// True when `slot` is the second half of an LDDW.
    bool is_continuation(std::size_t slot) const noexcept { return continuation_[slot] != 0; }

    /// 64-bit constant of the LDDW starting at `slot`.
    std::uint64_t wide_immediate(std::size_t slot) const;

    friend bool operator==(const Program& a, const Program& b) { return a.instructions_ == b.instructions_; }

private:
    explicit Program(std::vector<Instruction> instructions);

    std::vector<Instruction> instructions_;
    std::vector<std::uint8_t> continuation_;
};

/// Decodes a raw `.bpf` byte stream. Throws sbpf::Error with code
/// InvalidLength, InvalidOpcode, InvalidRegister or TruncatedWideLoad; the
/// error position is the offending slot.
Program decode_program(std::span<const std::uint8_t> bytes);

/// Inverse of decode_program. Throws EmptyProgram for an empty list and
/// UnsupportedInstruction for anything outside the supported set.
std::vector<std::uint8_t> encode_program(std::span<const Instruction> instructions);
std::vector<std::uint8_t> encode_program(const Program& program);

void encode_instruction(const Instruction& insn, std::span<std::uint8_t, kSlotSize> out) noexcept;
Instruction decode_instruction(std::span<const std::uint8_t, kSlotSize> in) noexcept;

} // namespace sbpf::isa
