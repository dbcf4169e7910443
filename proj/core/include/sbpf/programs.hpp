#pragma once

#include "sbpf/isa.hpp"

/// BPF programs used by the three accelerated paths. All of them verify
/// against the standard helper signatures.
namespace sbpf::programs {

/// Copies the whole context buffer ([u64 len][path bytes]) into the calling
/// thread's args memory in 512-byte chunks through the stack. Returns the
/// byte count. A buffer larger than the args memory faults in args_write.
isa::Program statfs_args_writer();

/// Copies the 64-byte record from the thread's return value memory into the
/// context buffer. Returns 64.
isa::Program statfs_retval_reader();

/// Pushes the context buffer (at most 512 bytes) as one ring record.
/// Returns 0 on success, 1 when the ring is full.
isa::Program ring_pusher();

/// Context: f1, f2, f3, outcome as u64. Predicts, then updates, and returns
/// the prediction made before the update.
isa::Program pss_predict_update();

/// shm_write_u64(8, 0x2a); return shm_read_u64(8).
isa::Program shm_roundtrip();

} // namespace sbpf::programs
