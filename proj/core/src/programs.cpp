#include "sbpf/programs.hpp"

#include "sbpf/builder.hpp"
#include "sbpf/helpers.hpp"

namespace sbpf::programs {

using namespace isa::ins;
namespace op = isa::op;
using isa::Builder;

namespace {

constexpr std::int32_t kChunk = 512;
// One chunk more than the 4096-byte args memory holds, so oversize input
// reaches args_write and faults instead of being truncated.
constexpr int kChunks = 9;

void frame_pointer_plus(Builder& b, std::uint8_t dst, std::int32_t off)
{
    b.emit(mov64_reg(dst, isa::kFramePointer));
    b.emit(add64_imm(dst, off));
}

} // namespace

isa::Program statfs_args_writer()
{
    Builder b;
    const auto done = b.new_label();
    b.emit(mov64_reg(6, 2)); // total bytes
    b.emit(mov64_imm(7, 0)); // bytes copied so far
    for (int k = 0; k < kChunks; ++k) {
        const auto full = b.new_label();
        b.jmp_reg(op::kJge, 7, 6, done);
        b.emit(mov64_reg(8, 6));
        b.emit(sub64_reg(8, 7));
        b.jmp_imm(op::kJle, 8, kChunk, full);
        b.emit(mov64_imm(8, kChunk));
        b.bind(full);
        // ctx_read(ctx_off = r7, stack_off = r10 - 512, len = r8)
        b.emit(mov64_reg(1, 7));
        frame_pointer_plus(b, 2, -kChunk);
        b.emit(mov64_reg(3, 8));
        b.emit(call(helpers::kCtxRead));
        // args_write(stack_off = r10 - 512, len = r8, slot_off = r7)
        frame_pointer_plus(b, 1, -kChunk);
        b.emit(mov64_reg(2, 8));
        b.emit(mov64_reg(3, 7));
        b.emit(call(helpers::kArgsWrite));
        b.emit(add64_reg(7, 8));
    }
    b.bind(done);
    b.emit(mov64_reg(0, 7));
    b.emit(exit());
    return b.build();
}

isa::Program statfs_retval_reader()
{
    Builder b;
    // retval_read(stack_off = r10 - 64, len = 64, slot_off = 0)
    frame_pointer_plus(b, 1, -64);
    b.emit(mov64_imm(2, 64));
    b.emit(mov64_imm(3, 0));
    b.emit(call(helpers::kRetvalRead));
    // ctx_write(stack_off = r10 - 64, ctx_off = 0, len = 64)
    frame_pointer_plus(b, 1, -64);
    b.emit(mov64_imm(2, 0));
    b.emit(mov64_imm(3, 64));
    b.emit(call(helpers::kCtxWrite));
    b.emit(exit());
    return b.build();
}

isa::Program ring_pusher()
{
    Builder b;
    b.emit(mov64_reg(6, 2));
    b.emit(mov64_imm(1, 0));
    frame_pointer_plus(b, 2, -kChunk);
    b.emit(mov64_reg(3, 6));
    b.emit(call(helpers::kCtxRead));
    frame_pointer_plus(b, 1, -kChunk);
    b.emit(mov64_reg(2, 6));
    b.emit(call(helpers::kRingPush));
    b.emit(exit());
    return b.build();
}

isa::Program pss_predict_update()
{
    Builder b;
    // ctx_read(0, r10 - 32, 32)
    b.emit(mov64_imm(1, 0));
    frame_pointer_plus(b, 2, -32);
    b.emit(mov64_imm(3, 32));
    b.emit(call(helpers::kCtxRead));
    b.emit(ldx(op::kSizeDW, 1, isa::kFramePointer, -32));
    b.emit(ldx(op::kSizeDW, 2, isa::kFramePointer, -24));
    b.emit(ldx(op::kSizeDW, 3, isa::kFramePointer, -16));
    b.emit(call(helpers::kPssPredict));
    b.emit(mov64_reg(6, 0));
    b.emit(ldx(op::kSizeDW, 1, isa::kFramePointer, -32));
    b.emit(ldx(op::kSizeDW, 2, isa::kFramePointer, -24));
    b.emit(ldx(op::kSizeDW, 3, isa::kFramePointer, -16));
    b.emit(ldx(op::kSizeDW, 4, isa::kFramePointer, -8));
    b.emit(call(helpers::kPssUpdate));
    b.emit(mov64_reg(0, 6));
    b.emit(exit());
    return b.build();
}

isa::Program shm_roundtrip()
{
    Builder b;
    b.emit(mov64_imm(1, 8));
    b.emit(mov64_imm(2, 0x2a));
    b.emit(call(helpers::kShmWriteU64));
    b.emit(mov64_imm(1, 8));
    b.emit(call(helpers::kShmReadU64));
    b.emit(exit());
    return b.build();
}

} // namespace sbpf::programs
