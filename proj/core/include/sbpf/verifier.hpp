#pragma once

#include "sbpf/isa.hpp"

#include <cstddef>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace sbpf::verifier {

inline constexpr std::size_t kMaxHelperCalls = 4096;

enum class ViolationKind {
    OutOfBoundsJump,
    BackwardJump,
    UnreachableExit,
    UninitializedRegister,
    StackOutOfBounds,
    IllegalMemoryAccess,
    WriteToFramePointer,
    UnknownHelper,
    ProgramTooLong,
    JumpIntoWideLoad,
    InvalidInstruction, // payload bytes did not decode
};

std::string_view to_string(ViolationKind kind) noexcept;

struct Violation {
    std::size_t slot;
    ViolationKind kind;
    std::string message;

    friend bool operator==(const Violation&, const Violation&) = default;
};

struct VerifierReport {
    bool accepted = false;
    std::vector<Violation> violations;
    std::size_t instruction_count = 0;

    bool has(ViolationKind kind) const noexcept;

    /// One violation per line: `<slot>\t<kind>\t<message>`.
    std::string format() const;

    friend bool operator==(const VerifierReport&, const VerifierReport&) = default;
};

/// Helper IDs a program may CALL, with the number of argument registers
/// (r1..r<arity>) each consumes.
class HelperSet {
public:
    HelperSet() = default;
    HelperSet(std::initializer_list<std::pair<const std::uint32_t, std::uint8_t>> entries) : arity_(entries) {}

    void add(std::uint32_t id, std::uint8_t arity) { arity_[id] = arity; }
    bool contains(std::uint32_t id) const { return arity_.count(id) != 0; }
    std::uint8_t arity(std::uint32_t id) const { return arity_.at(id); }
    std::size_t size() const noexcept { return arity_.size(); }

    const std::map<std::uint32_t, std::uint8_t>& entries() const noexcept { return arity_; }

private:
    std::map<std::uint32_t, std::uint8_t> arity_;
};

class VerifiedProgram {
public:
    const isa::Program& program() const noexcept { return program_; }
    const std::set<std::uint32_t>& helper_ids_used() const noexcept { return helpers_used_; }
    std::size_t max_stack_depth() const noexcept { return max_stack_depth_; }

private:
    friend std::variant<VerifiedProgram, VerifierReport> verify(const isa::Program&, const HelperSet&);

    VerifiedProgram(isa::Program program, std::set<std::uint32_t> helpers, std::size_t depth)
        : program_(std::move(program)), helpers_used_(std::move(helpers)), max_stack_depth_(depth)
    {
    }

    isa::Program program_;
    std::set<std::uint32_t> helpers_used_;
    std::size_t max_stack_depth_;
};

using VerifyResult = std::variant<VerifiedProgram, VerifierReport>;

/// Runs instruction validation, control-flow analysis, the register/stack
/// safety dataflow and resource limits. Returns a VerifiedProgram only when
/// no violation was found.
VerifyResult verify(const isa::Program& program, const HelperSet& registered_helpers);

/// Same analysis, always returning the report.
VerifierReport analyze(const isa::Program& program, const HelperSet& registered_helpers);

} // namespace sbpf::verifier
