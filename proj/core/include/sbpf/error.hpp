#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace sbpf {

enum class Errc {
    // isa
    InvalidLength,
    InvalidOpcode,
    InvalidRegister,
    TruncatedWideLoad,
    EmptyProgram,
    UnsupportedInstruction,
    // vm
    StepLimitExceeded,
    UnknownHelper,
    HelperFault,
    MemoryFault,
    DuplicateHelper,
    ReservedId,
    // shmem
    AlreadyAllocated,
    OutOfMemory,
    NotFound,
    InvalidThread,
    LengthExceedsSlot,
    // integrity
    EmptyPayload,
    MalformedContainer,
    IntegrityRejected,
    VerificationRejected,
    AllocationFailed,
    // ring
    RecordTooLarge,
    // transport
    ChannelClosed,
    PathTooLong,
    ProtocolError,
    ServiceUnavailable,
    IoError,
};

std::string_view to_string(Errc code) noexcept;

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message,
          std::optional<std::size_t> position = std::nullopt);

    Errc code() const noexcept { return code_; }

    /// Instruction slot or byte position the error refers to, when there is one.
    std::optional<std::size_t> position() const noexcept { return position_; }

private:
    Errc code_;
    std::optional<std::size_t> position_;
};

} // namespace sbpf
