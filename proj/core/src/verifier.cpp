#include "sbpf/verifier.hpp"

#include <optional>
#include <sstream>

namespace sbpf::verifier {

using isa::Instruction;
using isa::Kind;

std::string_view to_string(ViolationKind kind) noexcept
{
    switch (kind) {
    case ViolationKind::OutOfBoundsJump: return "OutOfBoundsJump";
    case ViolationKind::BackwardJump: return "BackwardJump";
    case ViolationKind::UnreachableExit: return "UnreachableExit";
    case ViolationKind::UninitializedRegister: return "UninitializedRegister";
    case ViolationKind::StackOutOfBounds: return "StackOutOfBounds";
    case ViolationKind::IllegalMemoryAccess: return "IllegalMemoryAccess";
    case ViolationKind::WriteToFramePointer: return "WriteToFramePointer";
    case ViolationKind::UnknownHelper: return "UnknownHelper";
    case ViolationKind::ProgramTooLong: return "ProgramTooLong";
    case ViolationKind::JumpIntoWideLoad: return "JumpIntoWideLoad";
    case ViolationKind::InvalidInstruction: return "InvalidInstruction";
    }
    return "Unknown";
}

bool VerifierReport::has(ViolationKind kind) const noexcept
{
    for (const Violation& v : violations)
        if (v.kind == kind)
            return true;
    return false;
}

std::string VerifierReport::format() const
{
    std::ostringstream out;
    for (const Violation& v : violations)
        out << v.slot << '\t' << to_string(v.kind) << '\t' << v.message << '\n';
    return out.str();
}

namespace {

using RegMask = std::uint16_t;

constexpr RegMask bit(std::uint8_t reg) { return static_cast<RegMask>(1u << reg); }

// r1-r5 carry the entry context, r10 is the frame token.
constexpr RegMask kEntryMask = bit(1) | bit(2) | bit(3) | bit(4) | bit(5) | bit(10);
constexpr RegMask kCallerSaved = bit(1) | bit(2) | bit(3) | bit(4) | bit(5);

struct Analysis {
    VerifierReport report;
    std::set<std::uint32_t> helpers_used;
    std::size_t max_stack_depth = 0;
};

class Checker {
public:
    Checker(const isa::Program& program, const HelperSet& helpers)
        : prog_(program), helpers_(helpers), n_(program.size())
    {
    }

    Analysis run()
    {
        out_.report.instruction_count = n_;
        validate_instructions();
        const bool cfg_ok = check_control_flow();
        if (cfg_ok)
            check_safety();
        check_resources();
        out_.report.accepted = out_.report.violations.empty();
        return std::move(out_);
    }

private:
    void add(std::size_t slot, ViolationKind kind, std::string message)
    {
        out_.report.violations.push_back({slot, kind, std::move(message)});
    }

    static std::string reg_name(std::uint8_t r) { return "r" + std::to_string(r); }

    bool writes_dst(const Instruction& insn) const
    {
        switch (isa::kind_of(insn.opcode)) {
        case Kind::Alu64:
        case Kind::Alu32:
        case Kind::Load:
        case Kind::WideLoad:
            return true;
        default:
            return false;
        }
    }

    std::optional<std::ptrdiff_t> jump_target(std::size_t pc) const
    {
        const Instruction& insn = prog_[pc];
        if (!isa::is_jump(insn))
            return std::nullopt;
        return static_cast<std::ptrdiff_t>(pc) + 1 + insn.offset;
    }

    std::size_t width(std::size_t pc) const
    {
        return isa::kind_of(prog_[pc].opcode) == Kind::WideLoad ? 2 : 1;
    }

    // Instruction validation: frame pointer writes, helper IDs, LDDW halves.
    void validate_instructions()
    {
        for (std::size_t pc = 0; pc < n_; ++pc) {
            if (prog_.is_continuation(pc))
                continue;
            const Instruction& insn = prog_[pc];
            if (writes_dst(insn) && insn.dst == isa::kFramePointer)
                add(pc, ViolationKind::WriteToFramePointer, "write to read-only frame pointer r10");
            if (isa::kind_of(insn.opcode) == Kind::Call) {
                const auto id = static_cast<std::uint32_t>(insn.imm);
                if (!helpers_.contains(id))
                    add(pc, ViolationKind::UnknownHelper, "call to unregistered helper " + std::to_string(id));
                else
                    out_.helpers_used.insert(id);
            }
            if (auto target = jump_target(pc); target && *target >= 0 && *target < static_cast<std::ptrdiff_t>(n_)
                && prog_.is_continuation(static_cast<std::size_t>(*target)))
                add(pc, ViolationKind::JumpIntoWideLoad,
                    "jump to lddw continuation slot " + std::to_string(*target));
        }
    }

    // Control flow: in-range forward jumps only, and no path falls off the end.
    bool check_control_flow()
    {
        bool ok = true;
        for (std::size_t pc = 0; pc < n_; ++pc) {
            if (prog_.is_continuation(pc))
                continue;
            auto target = jump_target(pc);
            if (!target)
                continue;
            if (*target < 0 || *target >= static_cast<std::ptrdiff_t>(n_)) {
                add(pc, ViolationKind::OutOfBoundsJump,
                    "jump target " + std::to_string(*target) + " outside [0, " + std::to_string(n_) + ")");
                ok = false;
            } else if (prog_[pc].offset < 0) {
                add(pc, ViolationKind::BackwardJump, "backward jump to slot " + std::to_string(*target));
                ok = false;
            } else if (prog_.is_continuation(static_cast<std::size_t>(*target))) {
                ok = false;
            }
        }
        if (!ok)
            return false;

        reachable_.assign(n_, 0);
        reachable_[0] = 1;
        for (std::size_t pc = 0; pc < n_; ++pc) {
            if (!reachable_[pc] || prog_.is_continuation(pc))
                continue;
            const Kind kind = isa::kind_of(prog_[pc].opcode);
            if (kind == Kind::Jump || kind == Kind::Branch)
                reachable_[static_cast<std::size_t>(*jump_target(pc))] = 1;
            if (kind == Kind::Exit || kind == Kind::Jump)
                continue;
            const std::size_t next = pc + width(pc);
            if (next >= n_) {
                add(pc, ViolationKind::UnreachableExit, "execution falls off the end without exit");
                ok = false;
            } else {
                reachable_[next] = 1;
            }
        }
        return ok;
    }

    void require(std::size_t pc, RegMask& state, std::uint8_t reg)
    {
        if (!(state & bit(reg))) {
            add(pc, ViolationKind::UninitializedRegister, reg_name(reg) + " read before initialization");
            state |= bit(reg);
        }
    }

    void check_stack_access(std::size_t pc, std::uint8_t base, std::int16_t offset, std::size_t access)
    {
        if (base != isa::kFramePointer) {
            add(pc, ViolationKind::IllegalMemoryAccess,
                "memory access through " + reg_name(base) + "; only r10-relative stack access is allowed");
            return;
        }
        const std::int64_t lo = offset;
        const std::int64_t hi = lo + static_cast<std::int64_t>(access);
        if (lo < -static_cast<std::int64_t>(isa::kStackSize) || hi > 0) {
            add(pc, ViolationKind::StackOutOfBounds,
                "stack access [r10" + std::to_string(lo) + ", +" + std::to_string(access) + ") outside [-512, 0)");
            return;
        }
        out_.max_stack_depth = std::max<std::size_t>(out_.max_stack_depth, static_cast<std::size_t>(-lo));
    }

    // Dataflow over the DAG in slot order: a register is initialized at a
    // slot only if it is initialized along every incoming path.
    void check_safety()
    {
        std::vector<std::optional<RegMask>> in(n_);
        in[0] = kEntryMask;
        auto merge = [&](std::size_t target, RegMask state) {
            in[target] = in[target] ? static_cast<RegMask>(*in[target] & state) : state;
        };

        for (std::size_t pc = 0; pc < n_; ++pc) {
            if (!reachable_[pc] || prog_.is_continuation(pc) || !in[pc])
                continue;
            RegMask state = *in[pc];
            const Instruction& insn = prog_[pc];
            const Kind kind = isa::kind_of(insn.opcode);
            switch (kind) {
            case Kind::Alu64:
            case Kind::Alu32:
                if (isa::uses_reg_source(insn.opcode))
                    require(pc, state, insn.src);
                if (isa::alu_op(insn.opcode) != isa::op::kMov)
                    require(pc, state, insn.dst);
                state |= bit(insn.dst);
                break;
            case Kind::Branch:
                if (isa::uses_reg_source(insn.opcode))
                    require(pc, state, insn.src);
                require(pc, state, insn.dst);
                break;
            case Kind::Jump:
                break;
            case Kind::Call: {
                const auto id = static_cast<std::uint32_t>(insn.imm);
                const std::uint8_t arity = helpers_.contains(id) ? helpers_.arity(id) : 0;
                for (std::uint8_t r = 1; r <= arity && r <= 5; ++r)
                    require(pc, state, r);
                state = static_cast<RegMask>((state & ~kCallerSaved) | bit(0));
                break;
            }
            case Kind::Exit:
                require(pc, state, 0);
                break;
            case Kind::Load:
                check_stack_access(pc, insn.src, insn.offset, isa::access_width(insn.opcode));
                state |= bit(insn.dst);
                break;
            case Kind::Store:
                check_stack_access(pc, insn.dst, insn.offset, isa::access_width(insn.opcode));
                break;
            case Kind::StoreReg:
                check_stack_access(pc, insn.dst, insn.offset, isa::access_width(insn.opcode));
                require(pc, state, insn.src);
                break;
            case Kind::WideLoad:
                state |= bit(insn.dst);
                break;
            case Kind::WideLoadHi:
                break;
            }

            if (kind == Kind::Jump || kind == Kind::Branch)
                merge(static_cast<std::size_t>(*jump_target(pc)), state);
            if (kind != Kind::Exit && kind != Kind::Jump) {
                const std::size_t next = pc + width(pc);
                if (next < n_)
                    merge(next, state);
            }
        }
    }

    void check_resources()
    {
        if (n_ > isa::kMaxProgramLen)
            add(isa::kMaxProgramLen, ViolationKind::ProgramTooLong,
                std::to_string(n_) + " instructions exceed the limit of " + std::to_string(isa::kMaxProgramLen));
        std::size_t calls = 0;
        for (std::size_t pc = 0; pc < n_; ++pc)
            if (!prog_.is_continuation(pc) && isa::kind_of(prog_[pc].opcode) == Kind::Call)
                ++calls;
        if (calls > kMaxHelperCalls)
            add(0, ViolationKind::ProgramTooLong,
                std::to_string(calls) + " helper calls exceed the limit of " + std::to_string(kMaxHelperCalls));
        if (out_.max_stack_depth > isa::kStackSize)
            add(0, ViolationKind::StackOutOfBounds, "stack footprint exceeds 512 bytes");
    }

    const isa::Program& prog_;
    const HelperSet& helpers_;
    std::size_t n_;
    std::vector<std::uint8_t> reachable_;
    Analysis out_;
};

} // namespace

VerifierReport analyze(const isa::Program& program, const HelperSet& registered_helpers)
{
    return Checker(program, registered_helpers).run().report;
}

VerifyResult verify(const isa::Program& program, const HelperSet& registered_helpers)
{
    Analysis result = Checker(program, registered_helpers).run();
    if (!result.report.accepted)
        return std::move(result.report);
    return VerifiedProgram(program, std::move(result.helpers_used), result.max_stack_depth);
}

} // namespace sbpf::verifier
