#include "sbpf/error.hpp"

namespace sbpf {

std::string_view to_string(Errc code) noexcept
{
    switch (code) {
    case Errc::InvalidLength: return "InvalidLength";
    case Errc::InvalidOpcode: return "InvalidOpcode";
    case Errc::InvalidRegister: return "InvalidRegister";
    case Errc::TruncatedWideLoad: return "TruncatedWideLoad";
    case Errc::EmptyProgram: return "EmptyProgram";
    case Errc::UnsupportedInstruction: return "UnsupportedInstruction";
    case Errc::StepLimitExceeded: return "StepLimitExceeded";
    case Errc::UnknownHelper: return "UnknownHelper";
    case Errc::HelperFault: return "HelperFault";
    case Errc::MemoryFault: return "MemoryFault";
    case Errc::DuplicateHelper: return "DuplicateHelper";
    case Errc::ReservedId: return "ReservedId";
    case Errc::AlreadyAllocated: return "AlreadyAllocated";
    case Errc::OutOfMemory: return "OutOfMemory";
    case Errc::NotFound: return "NotFound";
    case Errc::InvalidThread: return "InvalidThread";
    case Errc::LengthExceedsSlot: return "LengthExceedsSlot";
    case Errc::EmptyPayload: return "EmptyPayload";
    case Errc::MalformedContainer: return "MalformedContainer";
    case Errc::IntegrityRejected: return "IntegrityRejected";
    case Errc::VerificationRejected: return "VerificationRejected";
    case Errc::AllocationFailed: return "AllocationFailed";
    case Errc::RecordTooLarge: return "RecordTooLarge";
    case Errc::ChannelClosed: return "ChannelClosed";
    case Errc::PathTooLong: return "PathTooLong";
    case Errc::ProtocolError: return "ProtocolError";
    case Errc::ServiceUnavailable: return "ServiceUnavailable";
    case Errc::IoError: return "IoError";
    }
    return "Unknown";
}

Error::Error(Errc code, const std::string& message, std::optional<std::size_t> position)
    : std::runtime_error(std::string(to_string(code)) + ": " + message)
    , code_(code)
    , position_(position)
{
}

} // namespace sbpf
