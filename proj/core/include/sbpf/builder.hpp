#pragma once

#include "sbpf/isa.hpp"

#include <cstdint>
#include <vector>

namespace sbpf::isa {

/// Single-instruction constructors. Names follow the disassembler mnemonics.
namespace ins {

Instruction alu64_imm(std::uint8_t alu_op, std::uint8_t dst, std::int32_t imm);
Instruction alu64_reg(std::uint8_t alu_op, std::uint8_t dst, std::uint8_t src);
Instruction alu32_imm(std::uint8_t alu_op, std::uint8_t dst, std::int32_t imm);
Instruction alu32_reg(std::uint8_t alu_op, std::uint8_t dst, std::uint8_t src);

inline Instruction mov64_imm(std::uint8_t dst, std::int32_t imm) { return alu64_imm(op::kMov, dst, imm); }
inline Instruction mov64_reg(std::uint8_t dst, std::uint8_t src) { return alu64_reg(op::kMov, dst, src); }
inline Instruction add64_imm(std::uint8_t dst, std::int32_t imm) { return alu64_imm(op::kAdd, dst, imm); }
inline Instruction add64_reg(std::uint8_t dst, std::uint8_t src) { return alu64_reg(op::kAdd, dst, src); }
inline Instruction sub64_reg(std::uint8_t dst, std::uint8_t src) { return alu64_reg(op::kSub, dst, src); }
inline Instruction div64_reg(std::uint8_t dst, std::uint8_t src) { return alu64_reg(op::kDiv, dst, src); }

Instruction ja(std::int16_t offset);
Instruction jmp_imm(std::uint8_t jmp_op, std::uint8_t dst, std::int32_t imm, std::int16_t offset);
Instruction jmp_reg(std::uint8_t jmp_op, std::uint8_t dst, std::uint8_t src, std::int16_t offset);
Instruction jmp32_imm(std::uint8_t jmp_op, std::uint8_t dst, std::int32_t imm, std::int16_t offset);
Instruction call(std::int32_t helper_id);
Instruction exit();

/// Memory ops; `size` is one of op::kSizeB/H/W/DW.
Instruction ldx(std::uint8_t size, std::uint8_t dst, std::uint8_t src, std::int16_t offset);
Instruction st(std::uint8_t size, std::uint8_t dst, std::int16_t offset, std::int32_t imm);
Instruction stx(std::uint8_t size, std::uint8_t dst, std::int16_t offset, std::uint8_t src);

/// Both slots of an LDDW.
std::vector<Instruction> lddw(std::uint8_t dst, std::uint64_t value);

} // namespace ins

/// Assembles an instruction list with forward/backward labels resolved to
/// slot offsets.
class Builder {
public:
    using Label = std::size_t;

    Label new_label();
    void bind(Label label);

    Builder& emit(const Instruction& insn);
    Builder& emit(const std::vector<Instruction>& insns);

    /// Emits a jump whose offset is patched when build() runs.
    Builder& ja(Label target);
    Builder& jmp_imm(std::uint8_t jmp_op, std::uint8_t dst, std::int32_t imm, Label target);
    Builder& jmp_reg(std::uint8_t jmp_op, std::uint8_t dst, std::uint8_t src, Label target);

    std::size_t size() const noexcept { return insns_.size(); }
    Program build() const;

private:
    struct Fixup {
        std::size_t slot;
        Label label;
    };
    std::vector<Instruction> insns_;
    std::vector<std::ptrdiff_t> labels_;
    std::vector<Fixup> fixups_;
};

} // namespace sbpf::isa
