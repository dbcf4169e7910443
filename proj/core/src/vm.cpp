#include "sbpf/vm.hpp"

#include <cstring>

namespace sbpf::vm {

using isa::Instruction;
namespace op = isa::op;

namespace {

[[noreturn]] void fault(const std::string& what)
{
    throw Error(Errc::HelperFault, what);
}

std::string range(std::uint64_t off, std::uint64_t len)
{
    return "[" + std::to_string(off) + ", +" + std::to_string(len) + ")";
}

std::uint64_t load_le(const std::uint8_t* p, std::size_t width)
{
    std::uint64_t v = 0;
    std::memcpy(&v, p, width);
    return v;
}

void store_le(std::uint8_t* p, std::uint64_t v, std::size_t width)
{
    std::memcpy(p, &v, width);
}

std::uint64_t alu64(std::uint8_t code, std::uint64_t dst, std::uint64_t src)
{
    switch (code) {
    case op::kAdd: return dst + src;
    case op::kSub: return dst - src;
    case op::kMul: return dst * src;
    case op::kDiv: return src == 0 ? 0 : dst / src;
    case op::kOr: return dst | src;
    case op::kAnd: return dst & src;
    case op::kLsh: return dst << (src & 63);
    case op::kRsh: return dst >> (src & 63);
    case op::kNeg: return ~dst + 1;
    case op::kMod: return src == 0 ? dst : dst % src;
    case op::kXor: return dst ^ src;
    case op::kMov: return src;
    case op::kArsh: return static_cast<std::uint64_t>(static_cast<std::int64_t>(dst) >> (src & 63));
    }
    return dst;
}

std::uint32_t alu32(std::uint8_t code, std::uint32_t dst, std::uint32_t src)
{
    switch (code) {
    case op::kAdd: return dst + src;
    case op::kSub: return dst - src;
    case op::kMul: return dst * src;
    case op::kDiv: return src == 0 ? 0 : dst / src;
    case op::kOr: return dst | src;
    case op::kAnd: return dst & src;
    case op::kLsh: return dst << (src & 31);
    case op::kRsh: return dst >> (src & 31);
    case op::kNeg: return ~dst + 1;
    case op::kMod: return src == 0 ? dst : dst % src;
    case op::kXor: return dst ^ src;
    case op::kMov: return src;
    case op::kArsh: return static_cast<std::uint32_t>(static_cast<std::int32_t>(dst) >> (src & 31));
    }
    return dst;
}

template <class U, class S>
bool compare(std::uint8_t code, U a, U b)
{
    switch (code) {
    case op::kJeq: return a == b;
    case op::kJgt: return a > b;
    case op::kJge: return a >= b;
    case op::kJset: return (a & b) != 0;
    case op::kJne: return a != b;
    case op::kJsgt: return static_cast<S>(a) > static_cast<S>(b);
    case op::kJsge: return static_cast<S>(a) >= static_cast<S>(b);
    case op::kJlt: return a < b;
    case op::kJle: return a <= b;
    case op::kJslt: return static_cast<S>(a) < static_cast<S>(b);
    case op::kJsle: return static_cast<S>(a) <= static_cast<S>(b);
    }
    return false;
}

} // namespace

std::span<std::uint8_t> HelperEnv::stack_window(std::uint64_t frame_offset, std::uint64_t len) const
{
    const auto off = static_cast<std::int64_t>(frame_offset);
    const auto size = static_cast<std::int64_t>(stack.size());
    if (off < -size || off >= 0 || len > static_cast<std::uint64_t>(-off))
        fault("stack access [r10" + std::to_string(off) + ", +" + std::to_string(len) + ") outside [-512, 0)");
    return stack.subspan(static_cast<std::size_t>(size + off), static_cast<std::size_t>(len));
}

std::span<std::uint8_t> HelperEnv::segment_window(std::uint64_t offset, std::uint64_t len) const
{
    if (!segment || segment->empty())
        fault("no shared segment attached");
    if (offset > segment->bytes.size() || len > segment->bytes.size() - offset)
        fault("segment access " + range(offset, len) + " outside segment of "
              + std::to_string(segment->bytes.size()) + " bytes");
    return segment->bytes.subspan(offset, len);
}

std::span<std::uint8_t> HelperEnv::context_window(std::uint64_t offset, std::uint64_t len) const
{
    if (offset > context.size() || len > context.size() - offset)
        fault("context access " + range(offset, len) + " outside context of " + std::to_string(context.size())
              + " bytes");
    return context.subspan(offset, len);
}

HelperTable& HelperTable::register_helper(std::uint32_t id, std::string name, std::uint8_t arity, HelperFn fn)
{
    if (id == 0)
        throw Error(Errc::ReservedId, "helper id 0 is reserved");
    if (arity > 5)
        throw std::invalid_argument("helper arity must be at most 5");
    if (helpers_.count(id))
        throw Error(Errc::DuplicateHelper, "helper id " + std::to_string(id) + " already registered as "
                                               + helpers_.at(id).name);
    helpers_.emplace(id, Helper{std::move(name), arity, std::move(fn)});
    return *this;
}

const Helper* HelperTable::find(std::uint32_t id) const
{
    auto it = helpers_.find(id);
    return it == helpers_.end() ? nullptr : &it->second;
}

verifier::HelperSet HelperTable::signatures() const
{
    verifier::HelperSet set;
    for (const auto& [id, helper] : helpers_)
        set.add(id, helper.arity);
    return set;
}

Vm::Vm(HelperTable helpers, shmem::SegmentView segment, std::uint32_t thread_id, shmem::ThreadSlotLayout layout)
    : helpers_(std::move(helpers)), segment_(segment), thread_id_(thread_id), layout_(layout)
{
}

std::uint64_t Vm::execute(const verifier::VerifiedProgram& program, Context context)
{
    return execute_with_registers(program, {context.word, context.buffer.size(), 0, 0, 0}, context.buffer);
}

std::uint64_t Vm::execute_with_registers(const verifier::VerifiedProgram& program, const Args& args,
                                         std::span<std::uint8_t> context)
{
    for (std::uint32_t id : program.helper_ids_used())
        if (!helpers_.find(id))
            throw Error(Errc::UnknownHelper, "helper " + std::to_string(id) + " is not registered in this vm");
    return run(program.program(), args, context);
}

std::uint64_t Vm::execute_unchecked(const isa::Program& program, const Args& args, std::span<std::uint8_t> context)
{
    return run(program, args, context);
}

std::uint64_t Vm::run(const isa::Program& program, const Args& args, std::span<std::uint8_t> context)
{
    std::array<std::uint64_t, isa::kNumRegisters> reg{};
    for (std::size_t i = 0; i < args.size(); ++i)
        reg[i + 1] = args[i];
    reg[isa::kFramePointer] = kStackTopToken;
    stack_.fill(0);
    steps_ = 0;

    HelperEnv env{stack_, context, &segment_, thread_id_, &layout_};
    const std::size_t n = program.size();
    const auto stack_size = static_cast<std::int64_t>(stack_.size());

    auto address = [&](std::size_t pc, std::uint64_t base, std::int16_t off, std::size_t width) -> std::uint8_t* {
        const auto addr = static_cast<std::int64_t>(base - kStackTopToken + static_cast<std::uint64_t>(
                                                        static_cast<std::int64_t>(off)));
        if (addr < -stack_size || addr + static_cast<std::int64_t>(width) > 0)
            throw Error(Errc::MemoryFault, "memory access at r10" + std::to_string(addr) + " outside the stack",
                        pc);
        return stack_.data() + (stack_size + addr);
    };

    std::size_t pc = 0;
    while (true) {
        if (pc >= n)
            throw Error(Errc::MemoryFault, "execution left the program at slot " + std::to_string(pc), pc);
        if (++steps_ > step_limit_)
            throw Error(Errc::StepLimitExceeded, "step limit " + std::to_string(step_limit_) + " exceeded", pc);
        const Instruction& insn = program[pc];
        const std::uint8_t code = insn.opcode;
        const auto imm64 = static_cast<std::uint64_t>(static_cast<std::int64_t>(insn.imm));
        const auto imm32 = static_cast<std::uint32_t>(insn.imm);
        std::uint64_t& dst = reg[insn.dst];
        const std::uint64_t src = reg[insn.src];

        switch (isa::op_class(code)) {
        case op::kClassAlu64:
            dst = alu64(isa::alu_op(code), dst, isa::uses_reg_source(code) ? src : imm64);
            ++pc;
            break;
        case op::kClassAlu32:
            dst = alu32(isa::alu_op(code), static_cast<std::uint32_t>(dst),
                        isa::uses_reg_source(code) ? static_cast<std::uint32_t>(src) : imm32);
            ++pc;
            break;
        case op::kClassJmp:
            if (code == op::kJaOp) {
                pc = pc + 1 + insn.offset;
            } else if (code == op::kExitOp) {
                return reg[0];
            } else if (code == op::kCallOp) {
                const auto id = static_cast<std::uint32_t>(insn.imm);
                const Helper* helper = helpers_.find(id);
                if (!helper)
                    throw Error(Errc::UnknownHelper, "call to unregistered helper " + std::to_string(id), pc);
                const Args call_args{reg[1], reg[2], reg[3], reg[4], reg[5]};
                try {
                    reg[0] = helper->fn(env, call_args);
                } catch (const Error& e) {
                    if (e.code() != Errc::HelperFault)
                        throw;
                    throw Error(Errc::HelperFault, "helper " + std::to_string(id) + " (" + helper->name
                                                       + ") at slot " + std::to_string(pc) + ": " + e.what(),
                                pc);
                }
                for (int r = 1; r <= 5; ++r)
                    reg[r] = 0;
                ++pc;
            } else {
                const std::uint64_t rhs = isa::uses_reg_source(code) ? src : imm64;
                pc = compare<std::uint64_t, std::int64_t>(isa::alu_op(code), dst, rhs) ? pc + 1 + insn.offset
                                                                                       : pc + 1;
            }
            break;
        case op::kClassJmp32: {
            const std::uint32_t rhs = isa::uses_reg_source(code) ? static_cast<std::uint32_t>(src) : imm32;
            pc = compare<std::uint32_t, std::int32_t>(isa::alu_op(code), static_cast<std::uint32_t>(dst), rhs)
                     ? pc + 1 + insn.offset
                     : pc + 1;
            break;
        }
        case op::kClassLdx: {
            const std::size_t width = isa::access_width(code);
            dst = load_le(address(pc, src, insn.offset, width), width);
            ++pc;
            break;
        }
        case op::kClassSt: {
            const std::size_t width = isa::access_width(code);
            store_le(address(pc, dst, insn.offset, width), imm64, width);
            ++pc;
            break;
        }
        case op::kClassStx: {
            const std::size_t width = isa::access_width(code);
            store_le(address(pc, dst, insn.offset, width), src, width);
            ++pc;
            break;
        }
        case op::kClassLd:
            dst = program.wide_immediate(pc);
            pc += 2;
            break;
        }
    }
}

} // namespace sbpf::vm
