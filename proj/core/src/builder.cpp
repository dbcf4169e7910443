#include "sbpf/builder.hpp"

#include "sbpf/error.hpp"

namespace sbpf::isa {

namespace ins {

Instruction alu64_imm(std::uint8_t alu_op, std::uint8_t dst, std::int32_t imm)
{
    return {static_cast<std::uint8_t>(op::kClassAlu64 | op::kSrcImm | alu_op), dst, 0, 0, imm};
}

Instruction alu64_reg(std::uint8_t alu_op, std::uint8_t dst, std::uint8_t src)
{
    return {static_cast<std::uint8_t>(op::kClassAlu64 | op::kSrcReg | alu_op), dst, src, 0, 0};
}

Instruction alu32_imm(std::uint8_t alu_op, std::uint8_t dst, std::int32_t imm)
{
    return {static_cast<std::uint8_t>(op::kClassAlu32 | op::kSrcImm | alu_op), dst, 0, 0, imm};
}

Instruction alu32_reg(std::uint8_t alu_op, std::uint8_t dst, std::uint8_t src)
{
    return {static_cast<std::uint8_t>(op::kClassAlu32 | op::kSrcReg | alu_op), dst, src, 0, 0};
}

Instruction ja(std::int16_t offset) { return {op::kJaOp, 0, 0, offset, 0}; }

Instruction jmp_imm(std::uint8_t jmp_op, std::uint8_t dst, std::int32_t imm, std::int16_t offset)
{
    return {static_cast<std::uint8_t>(op::kClassJmp | op::kSrcImm | jmp_op), dst, 0, offset, imm};
}

Instruction jmp_reg(std::uint8_t jmp_op, std::uint8_t dst, std::uint8_t src, std::int16_t offset)
{
    return {static_cast<std::uint8_t>(op::kClassJmp | op::kSrcReg | jmp_op), dst, src, offset, 0};
}

Instruction jmp32_imm(std::uint8_t jmp_op, std::uint8_t dst, std::int32_t imm, std::int16_t offset)
{
    return {static_cast<std::uint8_t>(op::kClassJmp32 | op::kSrcImm | jmp_op), dst, 0, offset, imm};
}

Instruction call(std::int32_t helper_id) { return {op::kCallOp, 0, 0, 0, helper_id}; }
Instruction exit() { return {op::kExitOp, 0, 0, 0, 0}; }

Instruction ldx(std::uint8_t size, std::uint8_t dst, std::uint8_t src, std::int16_t offset)
{
    return {static_cast<std::uint8_t>(op::kClassLdx | op::kModeMem | size), dst, src, offset, 0};
}

Instruction st(std::uint8_t size, std::uint8_t dst, std::int16_t offset, std::int32_t imm)
{
    return {static_cast<std::uint8_t>(op::kClassSt | op::kModeMem | size), dst, 0, offset, imm};
}

Instruction stx(std::uint8_t size, std::uint8_t dst, std::int16_t offset, std::uint8_t src)
{
    return {static_cast<std::uint8_t>(op::kClassStx | op::kModeMem | size), dst, src, offset, 0};
}

std::vector<Instruction> lddw(std::uint8_t dst, std::uint64_t value)
{
    return {
        {op::kLddw, dst, 0, 0, static_cast<std::int32_t>(static_cast<std::uint32_t>(value))},
        {0, 0, 0, 0, static_cast<std::int32_t>(static_cast<std::uint32_t>(value >> 32))},
    };
}

} // namespace ins

Builder::Label Builder::new_label()
{
    labels_.push_back(-1);
    return labels_.size() - 1;
}

void Builder::bind(Label label)
{
    labels_.at(label) = static_cast<std::ptrdiff_t>(insns_.size());
}

Builder& Builder::emit(const Instruction& insn)
{
    insns_.push_back(insn);
    return *this;
}

Builder& Builder::emit(const std::vector<Instruction>& insns)
{
    insns_.insert(insns_.end(), insns.begin(), insns.end());
    return *this;
}

Builder& Builder::ja(Label target)
{
    fixups_.push_back({insns_.size(), target});
    return emit(ins::ja(0));
}

Builder& Builder::jmp_imm(std::uint8_t jmp_op, std::uint8_t dst, std::int32_t imm, Label target)
{
    fixups_.push_back({insns_.size(), target});
    return emit(ins::jmp_imm(jmp_op, dst, imm, 0));
}

Builder& Builder::jmp_reg(std::uint8_t jmp_op, std::uint8_t dst, std::uint8_t src, Label target)
{
    fixups_.push_back({insns_.size(), target});
    return emit(ins::jmp_reg(jmp_op, dst, src, 0));
}

Program Builder::build() const
{
    std::vector<Instruction> out = insns_;
    for (const Fixup& f : fixups_) {
        const std::ptrdiff_t target = labels_.at(f.label);
        if (target < 0)
            throw Error(Errc::UnsupportedInstruction, "unbound label " + std::to_string(f.label));
        out[f.slot].offset = static_cast<std::int16_t>(target - static_cast<std::ptrdiff_t>(f.slot) - 1);
    }
    return Program::from_instructions(std::move(out));
}

} // namespace sbpf::isa
