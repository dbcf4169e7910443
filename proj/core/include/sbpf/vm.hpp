#pragma once

#include "sbpf/error.hpp"
#include "sbpf/shmem.hpp"
#include "sbpf/verifier.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>

namespace sbpf::vm {

inline constexpr std::uint64_t kDefaultStepLimit = 1'000'000;

/// Value of r10 at entry. Stack addresses are offsets relative to it, so the
/// stack occupies [-512, 0) and no host address is ever exposed.
inline constexpr std::uint64_t kStackTopToken = 0;

/// What a helper can reach besides its arguments.
struct HelperEnv {
    std::span<std::uint8_t> stack;        // 512 bytes; stack offset -k maps to stack[512 - k]
    std::span<std::uint8_t> context;      // per-invocation host buffer, may be empty
    const shmem::SegmentView* segment;    // null when no segment is attached
    std::uint32_t thread_id;
    const shmem::ThreadSlotLayout* layout;

    /// Bounds-checked stack window for a frame-relative offset. Throws HelperFault.
    std::span<std::uint8_t> stack_window(std::uint64_t frame_offset, std::uint64_t len) const;
    /// Bounds-checked segment window. Throws HelperFault.
    std::span<std::uint8_t> segment_window(std::uint64_t offset, std::uint64_t len) const;
    /// Bounds-checked context window. Throws HelperFault.
    std::span<std::uint8_t> context_window(std::uint64_t offset, std::uint64_t len) const;
};

using Args = std::array<std::uint64_t, 5>;
using HelperFn = std::function<std::uint64_t(HelperEnv&, const Args&)>;

struct Helper {
    std::string name;
    std::uint8_t arity = 0;
    HelperFn fn;
};

class HelperTable {
public:
    /// Throws ReservedId for id 0 and DuplicateHelper for a repeated id.
    HelperTable& register_helper(std::uint32_t id, std::string name, std::uint8_t arity, HelperFn fn);

    const Helper* find(std::uint32_t id) const;
    verifier::HelperSet signatures() const;
    std::size_t size() const noexcept { return helpers_.size(); }

private:
    std::map<std::uint32_t, Helper> helpers_;
};

struct Context {
    std::uint64_t word = 0;
    std::span<std::uint8_t> buffer;
};

class Vm {
public:
    explicit Vm(HelperTable helpers, shmem::SegmentView segment = {}, std::uint32_t thread_id = 0,
                shmem::ThreadSlotLayout layout = {});

    /// Entry: r1 = context word, r2 = context buffer length, r3-r5 = 0.
    std::uint64_t execute(const verifier::VerifiedProgram& program, Context context = {});

    /// Entry with explicit r1-r5.
    std::uint64_t execute_with_registers(const verifier::VerifiedProgram& program, const Args& args,
                                         std::span<std::uint8_t> context = {});

    void set_segment(shmem::SegmentView segment) noexcept { segment_ = segment; }
    void set_thread(std::uint32_t thread_id) noexcept { thread_id_ = thread_id; }
    void set_step_limit(std::uint64_t limit) noexcept { step_limit_ = limit; }

    const HelperTable& helpers() const noexcept { return helpers_; }
    std::uint64_t last_step_count() const noexcept { return steps_; }

    /// Runs an unverified program. Only for differential testing: the
    /// interpreter's own bounds checks still apply, so misbehaving programs
    /// raise MemoryFault, UnknownHelper or StepLimitExceeded.
    std::uint64_t execute_unchecked(const isa::Program& program, const Args& args,
                                    std::span<std::uint8_t> context = {});

private:
    std::uint64_t run(const isa::Program& program, const Args& args, std::span<std::uint8_t> context);

    HelperTable helpers_;
    shmem::SegmentView segment_;
    std::uint32_t thread_id_;
    shmem::ThreadSlotLayout layout_;
    std::uint64_t step_limit_ = kDefaultStepLimit;
    std::uint64_t steps_ = 0;
    alignas(16) std::array<std::uint8_t, isa::kStackSize> stack_{};
};

} // namespace sbpf::vm
