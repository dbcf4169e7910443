#pragma once

#include "sbpf/pss.hpp"
#include "sbpf/vm.hpp"

#include <cstdint>

/// The standard calling library. Shared memory offsets are relative to the
/// segment's base handle; stack offsets are frame-relative like r10 + off.
namespace sbpf::helpers {

enum HelperId : std::uint32_t {
    kShmReadU64 = 1,   // (offset) -> value
    kShmWriteU64 = 2,  // (offset, value)
    kShmReadVec = 3,   // (shm_offset, stack_offset, len) -> len
    kShmWriteVec = 4,  // (stack_offset, shm_offset, len) -> len
    kRingPush = 5,     // (stack_offset, len) -> 0 ok, 1 full
    kPssPredict = 6,   // (f1, f2, f3) -> 0/1
    kPssUpdate = 7,    // (f1, f2, f3, outcome) -> 1 if weights changed
    kArgsWrite = 8,    // (stack_offset, len, slot_offset) -> len
    kRetvalRead = 9,   // (stack_offset, len, slot_offset) -> len
    kCtxRead = 10,     // (ctx_offset, stack_offset, len) -> len
    kCtxWrite = 11,    // (stack_offset, ctx_offset, len) -> len
};

vm::HelperTable standard_helpers(pss::ModelParams pss_params = {});

/// Signatures of standard_helpers(), for verifying without building a table.
verifier::HelperSet standard_signatures();

} // namespace sbpf::helpers
